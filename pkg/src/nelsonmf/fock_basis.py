"""Truncated many-body basis: fermion configurations x boson occupations.

Fermion one-particle modes are the full set of grid momentum modes in the
canonical (|k|^2, lexicographic) order; a configuration is an N-subset
stored as a sorted tuple of mode ids (equivalently a bitmask). Boson
occupations run over the retained field modes with a per-mode ceiling
n_max, flattened little-endian (mode 0 varies fastest). State amplitudes
live in a (n_fermi, n_bose) array, so fermion-sector operators act on the
left index and boson-sector operators on the right.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
import scipy.sparse as sp

from .errors import BudgetError
from .grids import get_grid, get_modes
from .params import ModelParams

DEFAULT_BUDGET = 200_000

# Absolute ceiling independent of any configured budget; above this the
# enumerated structures no longer fit in memory regardless of intent.
HARD_DIMENSION_CAP = 5_000_000


def basis_dimension(params: ModelParams) -> int:
    """Total dimension without building anything."""
    grid = get_grid(params)
    modes = get_modes(params)
    n_fermi = math.comb(grid.size, params.n_fermions)
    return n_fermi * (params.fock_n_max + 1) ** modes.count


class FockBasis:
    def __init__(self, params: ModelParams):
        grid = get_grid(params)
        modes = get_modes(params)
        self.params = params
        self.grid = grid
        self.modes = modes
        self.n_modes = grid.size
        self.n_fermions = params.n_fermions
        self.n_boson_modes = modes.count
        self.n_max = params.fock_n_max

        self.n_fermi = math.comb(self.n_modes, self.n_fermions)
        self.n_bose = (self.n_max + 1) ** self.n_boson_modes
        self.dim = self.n_fermi * self.n_bose
        if self.dim > HARD_DIMENSION_CAP:
            raise BudgetError(
                f"basis dimension {self.n_fermi} x {self.n_bose} = {self.dim} "
                f"exceeds the hard cap {HARD_DIMENSION_CAP}"
            )

        self.configs = list(
            itertools.combinations(range(self.n_modes), self.n_fermions)
        )
        self.config_index = {c: i for i, c in enumerate(self.configs)}
        radix = self.n_max + 1
        strides = radix ** np.arange(self.n_boson_modes)
        flat = np.arange(self.n_bose)
        self.occupations = (flat[:, None] // strides[None, :]) % radix
        self.boson_energy = self.occupations @ modes.omega
        self.config_kinetic = np.array(
            [sum(grid.modes_k2[q] for q in c) for c in self.configs]
        )

    def boson_index(self, occupation) -> int:
        radix = self.n_max + 1
        return int(sum(n * radix**i for i, n in enumerate(occupation)))

    def ladder_down(self, mode: int) -> sp.csr_matrix:
        """Annihilation matrix for one retained mode on the boson factor."""
        return _boson_ladder(self.n_boson_modes, self.n_max, mode)

    def ladder_up(self, mode: int) -> sp.csr_matrix:
        return self.ladder_down(mode).conj().T.tocsr()


@lru_cache(maxsize=512)
def _boson_ladder(n_boson_modes: int, n_max: int, mode: int) -> sp.csr_matrix:
    radix = n_max + 1
    single = sp.diags(np.sqrt(np.arange(1, radix)), offsets=1)
    low = sp.identity(radix**mode, format="csr")
    high = sp.identity(radix ** (n_boson_modes - 1 - mode), format="csr")
    return sp.kron(high, sp.kron(single, low, format="csr"), format="csr")


@lru_cache(maxsize=64)
def get_basis(params: ModelParams) -> FockBasis:
    return FockBasis(params)


@dataclass
class ManyBodyState:
    """Amplitudes over the product basis plus a truncation-loss gauge.

    truncation_loss accumulates squared norm silently dropped whenever a
    creation operator pushes weight past the occupation ceiling.
    """

    amp: np.ndarray
    params: ModelParams
    time: float = 0.0
    truncation_loss: float = 0.0

    def copy(self) -> "ManyBodyState":
        return ManyBodyState(
            self.amp.copy(), self.params, self.time, self.truncation_loss
        )

    def norm(self) -> float:
        return float(np.linalg.norm(self.amp))


def _mode_view(amp: np.ndarray, basis: FockBasis, mode: int) -> np.ndarray:
    """Reshape so the chosen mode's occupation is its own axis."""
    radix = basis.n_max + 1
    low = radix**mode
    high = basis.n_bose // (low * radix)
    return amp.reshape(basis.n_fermi, high, radix, low)


def apply_annihilation(state: ManyBodyState, mode: int) -> ManyBodyState:
    """a_mode applied to the state; exact on the truncated space."""
    basis = get_basis(state.params)
    view = _mode_view(state.amp, basis, mode)
    out = np.zeros_like(view)
    weights = np.sqrt(np.arange(1, basis.n_max + 1))
    out[:, :, :-1, :] = weights[None, None, :, None] * view[:, :, 1:, :]
    return ManyBodyState(
        out.reshape(state.amp.shape), state.params, state.time, state.truncation_loss
    )


def apply_creation(state: ManyBodyState, mode: int) -> ManyBodyState:
    """a*_mode applied to the state.

    Weight raised past n_max cannot be represented; it is dropped silently
    and its squared norm is added to the truncation-loss gauge.
    """
    basis = get_basis(state.params)
    view = _mode_view(state.amp, basis, mode)
    out = np.zeros_like(view)
    weights = np.sqrt(np.arange(1, basis.n_max + 1))
    out[:, :, 1:, :] = weights[None, None, :, None] * view[:, :, :-1, :]
    lost = (basis.n_max + 1) * float(
        np.sum(np.abs(view[:, :, basis.n_max, :]) ** 2)
    )
    return ManyBodyState(
        out.reshape(state.amp.shape),
        state.params,
        state.time,
        state.truncation_loss + lost,
    )


def number_expectations(state: ManyBodyState) -> np.ndarray:
    """<n_kappa> for every retained mode."""
    basis = get_basis(state.params)
    probs = np.abs(state.amp) ** 2
    return probs.sum(axis=0) @ basis.occupations


def annihilation_expectation(state: ManyBodyState, mode: int) -> complex:
    lowered = apply_annihilation(state, mode)
    return complex(np.vdot(state.amp, lowered.amp))
