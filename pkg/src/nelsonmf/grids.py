"""Periodic grid, momentum lattice, and Fourier conventions.

Continuum transform pair used throughout:

    F[f](k)  = (2*pi)^(-d/2) * int e^(-i k x) f(x) dx
    f(x)     = (2*pi)^(-d/2) * int e^(+i k x) F(k) dk

discretized with dx^d resp. dk^d quadrature weights on the box [0, L)^d,
dk = 2*pi/L. With those weights the pair is an exact inverse on the grid
and Parseval holds exactly: sum |f|^2 dx^d = sum |F|^2 dk^d.

Mode enumeration rule (shared by every module): lattice vectors sorted by
(|k|^2, integer coordinate tuple), the tuple compared lexicographically.
"""

from __future__ import annotations

import itertools
from functools import lru_cache

import numpy as np

from .errors import ConfigError
from .params import ModelParams


def mode_sort_key(int_coords: tuple) -> tuple:
    return (int(sum(c * c for c in int_coords)), tuple(int_coords))


class Grid:
    """Spatial grid and full momentum lattice for one ModelParams set."""

    def __init__(self, params: ModelParams):
        self.params = params
        d = params.dim
        n = params.grid_points
        L = params.box_length
        self.dim = d
        self.n = n
        self.shape = (n,) * d
        self.size = n**d
        self.dx = L / n
        self.dk = 2.0 * np.pi / L
        self.dx_d = self.dx**d
        self.dk_d = self.dk**d
        self.x_axis = np.arange(n) * self.dx
        # fftfreq order: integers [0, 1, ..., n/2-1, -n/2, ..., -1]
        self.freq_int = np.rint(np.fft.fftfreq(n) * n).astype(int)
        self.k_axis = self.freq_int * self.dk
        k2 = np.zeros(self.shape)
        for axis in range(d):
            shape_ax = [1] * d
            shape_ax[axis] = n
            k2 = k2 + (self.k_axis**2).reshape(shape_ax)
        self.k2 = k2
        # All n^d modes in canonical order; the Fock module's one-particle basis.
        coords = sorted(
            itertools.product(sorted(self.freq_int.tolist()), repeat=d),
            key=mode_sort_key,
        )
        self.modes_int = np.array(coords, dtype=int)
        self.mode_index = {tuple(c): i for i, c in enumerate(coords)}
        self.modes_k = self.modes_int * self.dk
        self.modes_k2 = np.sum(self.modes_k**2, axis=1)
        self._pos_of_int = {
            int(m): i for i, m in enumerate(self.freq_int)
        }  # axis frequency integer -> fft array position

    def fft_address(self, int_coords) -> tuple:
        """Position of a lattice mode inside an fftn array."""
        return tuple(self._pos_of_int[int(c)] for c in int_coords)

    def forward(self, f: np.ndarray) -> np.ndarray:
        """Samples of F[f] on the fft-ordered momentum lattice."""
        return (2.0 * np.pi) ** (-self.dim / 2.0) * self.dx_d * np.fft.fftn(f)

    def inverse(self, F: np.ndarray) -> np.ndarray:
        """Inverse of forward; exact round trip on the grid."""
        factor = (2.0 * np.pi) ** (-self.dim / 2.0) * self.dk_d * self.size
        return factor * np.fft.ifftn(F)

    def inner(self, f: np.ndarray, g: np.ndarray) -> complex:
        """L^2 inner product, conjugation on the first argument."""
        return self.dx_d * np.vdot(f, g)

    def norm(self, f: np.ndarray) -> float:
        return float(np.sqrt(self.dx_d) * np.linalg.norm(f))

    def mode_function(self, int_coords) -> np.ndarray:
        """Normalized plane wave e^(i k x) / L^(d/2) for a lattice mode."""
        d, n = self.dim, self.n
        out = np.ones(self.shape, dtype=complex)
        for axis in range(d):
            shape_ax = [1] * d
            shape_ax[axis] = n
            phase = np.exp(1j * int_coords[axis] * self.dk * self.x_axis)
            out = out * phase.reshape(shape_ax)
        return out / self.params.box_length ** (self.dim / 2.0)

    def orbital_mode_coefficients(self, orbitals: np.ndarray) -> np.ndarray:
        """Expansion of grid functions in the canonical mode basis.

        Returns U of shape (n_modes, n_orbitals) with
        U[q, j] = <mode_q, orbital_j>; L^2-orthonormal orbitals give
        U with orthonormal columns.
        """
        orbs = np.atleast_2d(orbitals.reshape(orbitals.shape[0], -1))
        coeff = np.fft.fftn(
            orbitals.reshape((-1,) + self.shape), axes=tuple(range(1, self.dim + 1))
        )
        coeff = coeff.reshape(orbs.shape[0], self.size)
        flat_addresses = np.array(
            [
                np.ravel_multi_index(self.fft_address(c), self.shape)
                for c in self.modes_int
            ]
        )
        scale = self.dx_d / self.params.box_length ** (self.dim / 2.0)
        return scale * coeff[:, flat_addresses].T


class BosonModes:
    """Retained field modes: lattice vectors with |k| <= cutoff.

    At boson_mass = 0 the zero mode is removed (its frequency vanishes and
    the form factor would diverge). The set is symmetric under k -> -k and
    must fit strictly inside the grid's Nyquist box so that both members of
    each +/- pair are distinct grid modes.
    """

    def __init__(self, params: ModelParams, grid: Grid):
        self.params = params
        self.grid = grid
        d = params.dim
        dk = grid.dk
        reach = int(np.floor(params.cutoff / dk))
        if reach > grid.n // 2 - 1:
            raise ConfigError(
                f"cutoff {params.cutoff} reaches lattice coordinate {reach}, "
                f"outside the grid's usable range +-{grid.n // 2 - 1}"
            )
        kept = []
        for coords in itertools.product(range(-reach, reach + 1), repeat=d):
            k2 = sum(c * c for c in coords) * dk * dk
            if k2 > params.cutoff**2 + 1e-12:
                continue
            if params.boson_mass == 0.0 and all(c == 0 for c in coords):
                continue
            kept.append(coords)
        kept.sort(key=mode_sort_key)
        if not kept:
            raise ConfigError("no field modes retained under the cutoff")
        self.count = len(kept)
        self.int_coords = np.array(kept, dtype=int)
        self.k = self.int_coords * dk
        self.k2 = np.sum(self.k**2, axis=1)
        self.omega = np.sqrt(self.k2 + params.boson_mass**2)
        self.weight = grid.dk_d
        self.form_factor = (2.0 * np.pi) ** (-d / 2.0) / np.sqrt(2.0 * self.omega)
        self._position = {tuple(c): i for i, c in enumerate(kept)}
        self.neg_index = np.array(
            [self._position[tuple(-c for c in coords)] for coords in kept],
            dtype=int,
        )
        self.fft_addresses = tuple(
            np.array(addr)
            for addr in zip(*(grid.fft_address(c) for c in kept))
        )

    def mode_position(self, coords) -> int:
        """Index of the retained mode with the given integer coordinates."""
        key = tuple(int(c) for c in np.atleast_1d(coords))
        if key not in self._position:
            raise ConfigError(f"field mode {key} is not retained under the cutoff")
        return self._position[key]

    def form_factor_norm(self) -> float:
        """L^2 norm of the form factor over the retained lattice."""
        return float(np.sqrt(np.sum(self.form_factor**2) * self.weight))

    def mode_sum(self, values: np.ndarray) -> np.ndarray:
        """sum_kappa dk^d values_kappa e^(i k x) on the grid (complex)."""
        coeff = np.zeros(self.grid.shape, dtype=complex)
        np.add.at(coeff, self.fft_addresses, self.weight * values)
        return self.grid.size * np.fft.ifftn(coeff)

    def plane_waves(self) -> np.ndarray:
        """e^(i k x) on the grid for every retained mode, shape (count, *grid)."""
        out = np.empty((self.count,) + self.grid.shape, dtype=complex)
        for i, coords in enumerate(self.int_coords):
            out[i] = self.grid.mode_function(coords) * self.params.box_length ** (
                self.params.dim / 2.0
            )
        return out


@lru_cache(maxsize=64)
def get_grid(params: ModelParams) -> Grid:
    return Grid(params)


@lru_cache(maxsize=64)
def get_modes(params: ModelParams) -> BosonModes:
    return BosonModes(params, get_grid(params))
