"""Randomized verification of antisymmetry-driven operator bounds.

Two structural facts underpin the semiclassical trace-norm analysis and
are validated here directly, outside the dynamics:

* the pair bound: for wave functions antisymmetric in their first n - j
  slots, a one-body observable on slot 0 obeys
  |<psi, A_1 psi'>| <= ||A||_Tr / (n - j) ||psi|| ||psi'||, so
  antisymmetry converts a trace-norm bound into a 1/(n - j) gain;
* occupancy algebra: for an orthonormal family spanning the orbital
  space, the per-orbital occupancy operators on the antisymmetric sector
  are commuting projectors whose sum is dGamma of the span projector.

Both are exact statements, so the checks use hard tolerances near machine
precision rather than statistical ones.
"""

from __future__ import annotations

import itertools
import math

import numpy as np

from .errors import ConfigError
from .fock_basis import get_basis
from .fock_hamiltonian import one_body_operator
from .params import ModelParams


def _permutation_sign(perm: tuple[int, ...]) -> int:
    inversions = sum(
        1
        for i in range(len(perm))
        for j in range(i + 1, len(perm))
        if perm[i] > perm[j]
    )
    return -1 if inversions % 2 else 1


def antisymmetrize(tensor: np.ndarray, n_sym: int) -> np.ndarray:
    """Project onto functions antisymmetric in the first n_sym slots."""
    n_slots = tensor.ndim
    if not 1 <= n_sym <= n_slots:
        raise ConfigError("antisymmetrized block must fit the slot count")
    rest = tuple(range(n_sym, n_slots))
    out = np.zeros_like(tensor)
    for perm in itertools.permutations(range(n_sym)):
        out += _permutation_sign(perm) * np.transpose(tensor, perm + rest)
    return out / math.factorial(n_sym)


def _random_antisymmetric(
    rng: np.random.Generator, n_points: int, n_slots: int, n_sym: int
) -> np.ndarray:
    shape = (n_points,) * n_slots
    for _ in range(8):
        raw = rng.standard_normal(shape) + 1j * rng.standard_normal(shape)
        sym = antisymmetrize(raw, n_sym)
        norm = float(np.linalg.norm(sym))
        if norm > 1e-8:
            return sym / norm
    raise ConfigError("antisymmetric projection kept annihilating the draw")


def apply_first_slot(matrix: np.ndarray, tensor: np.ndarray) -> np.ndarray:
    return np.tensordot(matrix, tensor, axes=([1], [0]))


def pair_bound_trial(
    rng: np.random.Generator, n_points: int, n_slots: int, n_exempt: int
) -> float:
    """Ratio |<psi, A_1 psi'>| (n - j) / (||A||_Tr ||psi|| ||psi'||)."""
    n_sym = n_slots - n_exempt
    psi = _random_antisymmetric(rng, n_points, n_slots, n_sym)
    phi = _random_antisymmetric(rng, n_points, n_slots, n_sym)
    a = rng.standard_normal((n_points, n_points)) + 1j * rng.standard_normal(
        (n_points, n_points)
    )
    pairing = abs(complex(np.vdot(psi, apply_first_slot(a, phi))))
    trace_norm = float(np.sum(np.linalg.svd(a, compute_uv=False)))
    return pairing * n_sym / trace_norm


def pair_bound_check(trials: int = 200, seed: int = 7) -> float:
    """Worst bound ratio over randomized slot counts and exemptions.

    Draws states antisymmetric in all but the last j slots for varying
    (points, slots, j) and returns the maximal ratio, which the pair
    bound caps at 1.
    """
    rng = np.random.default_rng(seed)
    worst = 0.0
    shapes = [(4, 3), (5, 3), (4, 4), (6, 3), (5, 4)]
    for trial in range(trials):
        n_points, n_slots = shapes[trial % len(shapes)]
        n_exempt = int(rng.integers(0, n_slots - 1))
        worst = max(worst, pair_bound_trial(rng, n_points, n_slots, n_exempt))
    return worst


def occupancy_algebra_check(
    orbitals: np.ndarray, rotation: np.ndarray, params: ModelParams
) -> dict:
    """Exchange properties of orbital-occupancy operators.

    For an orthonormal family chi_j = sum_i rotation[i, j] phi_i the
    occupancy operators P_j = dGamma(|chi_j><chi_j|) on the antisymmetric
    sector are commuting projectors and sum_j P_j = dGamma(p). Returns the
    maximal absolute deviation of each property as dense matrices on the
    truncated fermion sector.
    """
    basis = get_basis(params)
    gram = rotation.conj().T @ rotation
    if np.max(np.abs(gram - np.eye(rotation.shape[1]))) > 1e-12:
        raise ConfigError("rotation matrix is not unitary")
    u = basis.grid.orbital_mode_coefficients(orbitals)
    chi = u @ rotation
    occupancy = [
        one_body_operator(basis, np.outer(chi[:, j], chi[:, j].conj()))
        for j in range(chi.shape[1])
    ]
    total = one_body_operator(basis, u @ u.conj().T)

    commutator = 0.0
    for j in range(len(occupancy)):
        for k in range(j + 1, len(occupancy)):
            deviation = occupancy[j] @ occupancy[k] - occupancy[k] @ occupancy[j]
            commutator = max(commutator, float(np.max(np.abs(deviation))))
    span_sum = float(np.max(np.abs(sum(occupancy) - total)))
    idempotency = max(float(np.max(np.abs(p @ p - p))) for p in occupancy)
    return {
        "commutator": commutator,
        "span_sum": span_sum,
        "idempotency": idempotency,
    }
