"""Model parameters and their validation.

Lengths live on a periodic box [0, L)^dim sampled with a power-of-two
number of points per axis, so every momentum used anywhere in the suite
sits on the lattice (2*pi/L) * Z^dim.
"""

from __future__ import annotations

from dataclasses import dataclass, asdict

from .errors import ConfigError

_ALLOWED_DIMS = (1, 2, 3)


def _is_power_of_two(n: int) -> bool:
    return n >= 1 and (n & (n - 1)) == 0


@dataclass(frozen=True)
class ModelParams:
    """Physical and numerical parameters shared by all modules.

    n_fermions:   particle number N >= 1.
    cutoff:       momentum cutoff on the interaction form factor, >= 1.
    field_scale:  prefactor delta_N of the field energy, >= 0.
    boson_mass:   field mass m >= 0; at m = 0 the zero mode is dropped.
    dim:          spatial dimension, 1, 2 or 3.
    box_length:   box edge L > 0.
    grid_points:  points per axis, a power of two.
    time_step:    integrator step dt > 0.
    fock_n_max:   per-mode boson occupation ceiling in the number basis.
    """

    n_fermions: int = 2
    cutoff: float = 2.0
    field_scale: float = 1.0
    boson_mass: float = 1.0
    dim: int = 1
    box_length: float = 6.283185307179586
    grid_points: int = 16
    time_step: float = 1.0e-3
    fock_n_max: int = 2

    def __post_init__(self) -> None:
        if self.n_fermions < 1:
            raise ConfigError(f"n_fermions must be >= 1, got {self.n_fermions}")
        if self.cutoff < 1.0:
            raise ConfigError(f"cutoff must be >= 1, got {self.cutoff}")
        if self.field_scale < 0.0:
            raise ConfigError(f"field_scale must be >= 0, got {self.field_scale}")
        if self.boson_mass < 0.0:
            raise ConfigError(f"boson_mass must be >= 0, got {self.boson_mass}")
        if self.dim not in _ALLOWED_DIMS:
            raise ConfigError(f"dim must be one of {_ALLOWED_DIMS}, got {self.dim}")
        if self.box_length <= 0.0:
            raise ConfigError(f"box_length must be > 0, got {self.box_length}")
        if not _is_power_of_two(self.grid_points):
            raise ConfigError(
                f"grid_points must be a power of two, got {self.grid_points}"
            )
        if self.time_step <= 0.0:
            raise ConfigError(f"time_step must be > 0, got {self.time_step}")
        if self.fock_n_max < 1:
            raise ConfigError(f"fock_n_max must be >= 1, got {self.fock_n_max}")
        if self.n_fermions > self.grid_points**self.dim:
            raise ConfigError(
                "n_fermions exceeds the number of one-particle modes "
                f"({self.n_fermions} > {self.grid_points**self.dim})"
            )

    @property
    def kinetic_scale(self) -> float:
        """N^(-1/3), the semiclassical scale multiplying the Laplacian."""
        return float(self.n_fermions) ** (-1.0 / 3.0)

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "ModelParams":
        known = set(cls.__dataclass_fields__)
        unknown = set(data) - known
        if unknown:
            raise ConfigError(f"unknown params keys: {sorted(unknown)}")
        return cls(**data)
