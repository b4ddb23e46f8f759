"""Product-state preparation and state snapshots.

The many-body initial datum is (Slater determinant of the orbitals) tensor
(per-mode coherent states): the boson displacement of retained mode kappa
is f_kappa = N^(2/3) alpha(k_kappa) dk^(d/2), matching the lattice
convention that alpha holds continuum samples.
"""

from __future__ import annotations

import struct

import numpy as np
import scipy.linalg
from scipy.special import gammaln

from .errors import ConfigError, TruncationError
from .fock_basis import FockBasis, ManyBodyState, get_basis
from .params import ModelParams

SNAPSHOT_MAGIC = b"NMFFOCK1"
DEFAULT_TRUNCATION_THRESHOLD = 1.0e-6


def coherent_coefficients(f: complex, n_max: int) -> np.ndarray:
    """e^(-|f|^2/2) f^n / sqrt(n!) for n = 0..n_max (not renormalized)."""
    n = np.arange(n_max + 1)
    if abs(f) == 0.0:
        out = np.zeros(n_max + 1, dtype=complex)
        out[0] = 1.0
        return out
    log_mag = -0.5 * abs(f) ** 2 + n * np.log(abs(f)) - 0.5 * gammaln(n + 1.0)
    return np.exp(log_mag + 1j * np.angle(f) * n)


def displacements(alpha: np.ndarray, params: ModelParams) -> np.ndarray:
    """Per-mode coherent displacement f_kappa from continuum alpha samples."""
    basis = get_basis(params)
    scale = float(params.n_fermions) ** (2.0 / 3.0) * np.sqrt(basis.modes.weight)
    return scale * np.asarray(alpha, dtype=complex)


def slater_amplitudes(orbitals: np.ndarray, basis: FockBasis) -> np.ndarray:
    """Configuration amplitudes det(U[config, :]) of the Slater determinant."""
    coeff = basis.grid.orbital_mode_coefficients(orbitals)
    config_rows = np.array(basis.configs, dtype=int)
    blocks = coeff[config_rows, :]
    return np.linalg.det(blocks)


def prepare_slater_coherent(
    orbitals: np.ndarray,
    alpha: np.ndarray,
    params: ModelParams,
    truncation_threshold: float = DEFAULT_TRUNCATION_THRESHOLD,
) -> ManyBodyState:
    """Slater x coherent product state on the truncated basis.

    The boson factor is truncated at n_max per mode and renormalized; the
    dropped weight (1 - product of per-mode retained weights) is recorded
    in the state's truncation-loss gauge and must not exceed the threshold.
    """
    basis = get_basis(params)
    if orbitals.shape[0] != params.n_fermions:
        raise ConfigError(
            f"expected {params.n_fermions} orbitals, got {orbitals.shape[0]}"
        )
    fermion = slater_amplitudes(orbitals, basis)
    f = displacements(alpha, params)
    boson = np.ones(1, dtype=complex)
    retained_weight = 1.0
    for kappa in range(basis.n_boson_modes):
        coeffs = coherent_coefficients(complex(f[kappa]), basis.n_max)
        retained_weight *= float(np.sum(np.abs(coeffs) ** 2))
        boson = np.kron(coeffs, boson)
    truncation_weight = 1.0 - retained_weight
    if truncation_weight > truncation_threshold:
        raise TruncationError(
            f"coherent truncation weight {truncation_weight:.3e} exceeds "
            f"threshold {truncation_threshold:.0e}; raise fock_n_max"
        )
    boson = boson / np.linalg.norm(boson)
    amp = np.outer(fermion, boson)
    return ManyBodyState(amp, params, 0.0, truncation_weight)


def weyl_matrix(alpha: np.ndarray, params: ModelParams) -> np.ndarray:
    """Dense Weyl displacement W(N^(2/3) alpha) on the truncated boson factor.

    The generator sum_k (f_k a*_k - conj(f_k) a_k) stays anti-Hermitian
    under truncation, so the matrix exponential is exactly unitary; it
    differs from the untruncated Weyl operator by truncation tails only.
    """
    basis = get_basis(params)
    f = displacements(alpha, params)
    generator = np.zeros((basis.n_bose, basis.n_bose), dtype=complex)
    for kappa in range(basis.n_boson_modes):
        down = basis.ladder_down(kappa).toarray()
        generator += f[kappa] * down.T - np.conj(f[kappa]) * down
    return scipy.linalg.expm(generator)


def save_state(path, state: ManyBodyState) -> None:
    """Snapshot: header (M, N, mode list, n_max) + little-endian amplitudes."""
    basis = get_basis(state.params)
    mode_coords = basis.modes.int_coords.astype("<i8")
    with open(path, "wb") as fh:
        fh.write(SNAPSHOT_MAGIC)
        fh.write(
            struct.pack(
                "<IIIII",
                basis.n_modes,
                basis.n_fermions,
                basis.n_boson_modes,
                basis.n_max,
                basis.params.dim,
            )
        )
        fh.write(struct.pack("<d", state.time))
        fh.write(mode_coords.tobytes())
        fh.write(np.ascontiguousarray(state.amp, dtype="<c16").tobytes())


def load_state(path, params: ModelParams) -> ManyBodyState:
    """Load a snapshot, validating the header against the given parameters."""
    basis = get_basis(params)
    with open(path, "rb") as fh:
        magic = fh.read(len(SNAPSHOT_MAGIC))
        if magic != SNAPSHOT_MAGIC:
            raise ConfigError(f"{path}: not a state snapshot")
        n_modes, n_fermions, n_boson_modes, n_max, dim = struct.unpack(
            "<IIIII", fh.read(20)
        )
        (time,) = struct.unpack("<d", fh.read(8))
        expected = (
            basis.n_modes,
            basis.n_fermions,
            basis.n_boson_modes,
            basis.n_max,
            params.dim,
        )
        if (n_modes, n_fermions, n_boson_modes, n_max, dim) != expected:
            raise ConfigError(
                f"{path}: snapshot basis {(n_modes, n_fermions, n_boson_modes, n_max, dim)} "
                f"does not match parameters {expected}"
            )
        coords = np.frombuffer(
            fh.read(8 * n_boson_modes * dim), dtype="<i8"
        ).reshape(n_boson_modes, dim)
        if not np.array_equal(coords, basis.modes.int_coords):
            raise ConfigError(f"{path}: snapshot mode list does not match")
        amp = np.frombuffer(fh.read(), dtype="<c16").reshape(
            basis.n_fermi, basis.n_bose
        )
    return ManyBodyState(amp.astype(complex), params, time)
