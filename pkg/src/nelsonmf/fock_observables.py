"""Reduced densities and mean-field comparison functionals.

Conventions: gamma_f is the trace-1 fermion one-body marginal in the mode
basis (Slater states give exactly projector/N); gamma_f2 the trace-1
two-body marginal; gamma_b the continuum-kernel boson one-body density
N^(-4/3) <a*_k' a_k> / dk^d, whose lattice trace (dk^d weight) is
N^(-4/3) times the photon number. Trace norms over the boson kernel carry
the dk^d quadrature weight so they discretize the continuum trace norm.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError
from .fock_basis import (
    ManyBodyState,
    annihilation_expectation,
    apply_annihilation,
    get_basis,
)
from .fock_hamiltonian import build_hamiltonian, interaction_shifts
from .fields import field_from_alpha
from .params import ModelParams
from .skg import alpha_norm


@dataclass
class ReducedDensities:
    gamma_f: np.ndarray
    gamma_f2: np.ndarray
    gamma_b: np.ndarray


@dataclass
class BetaReport:
    time: float
    beta_a1: float
    beta_a2: float
    beta_b: float
    beta_total: float
    tn_gamma_f: float
    tn_gamma_b: float
    margin_f_lower: float
    margin_f_upper: float
    margin_b: float


def _row_gram(amp: np.ndarray) -> np.ndarray:
    """G[S', S] = sum_b conj(amp[S', b]) amp[S, b]."""
    return amp.conj() @ amp.T


def _removal_sign(position: int) -> int:
    return -1 if position % 2 else 1


def fermion_rdm1(state: ManyBodyState) -> np.ndarray:
    """gamma_f[m, m'] = <c*_m' c_m> / N, trace exactly 1."""
    basis = get_basis(state.params)
    gram = _row_gram(state.amp)
    out = np.zeros((basis.n_modes, basis.n_modes), dtype=complex)
    for col, config in enumerate(basis.configs):
        occupied = set(config)
        for pos, q in enumerate(config):
            out[q, q] += gram[col, col]
            sign_q = _removal_sign(pos)
            remaining = [m for m in config if m != q]
            for t in range(basis.n_modes):
                if t == q or t in occupied:
                    continue
                insert_at = sum(1 for m in remaining if m < t)
                sign = sign_q * _removal_sign(insert_at)
                row = basis.config_index[tuple(sorted(remaining + [t]))]
                out[q, t] += sign * gram[row, col]
    return out / basis.n_fermions


def fermion_rdm2(state: ManyBodyState) -> np.ndarray:
    """gamma_f2[a, b, a', b'] = <c*_a' c*_b' c_b c_a> / (N (N-1))."""
    basis = get_basis(state.params)
    if basis.n_fermions < 2:
        raise ConfigError("two-body marginal needs at least two fermions")
    gram = _row_gram(state.amp)
    m_modes = basis.n_modes
    out = np.zeros((m_modes, m_modes, m_modes, m_modes), dtype=complex)
    for col, config in enumerate(basis.configs):
        for pos_a, a in enumerate(config):
            sign_a = _removal_sign(pos_a)
            after_a = [m for m in config if m != a]
            for pos_b, b in enumerate(after_a):
                sign_ab = sign_a * _removal_sign(pos_b)
                rest = tuple(m for m in after_a if m != b)
                rest_set = set(rest)
                for b_new in range(m_modes):
                    if b_new in rest_set:
                        continue
                    sign_b = sign_ab * _removal_sign(
                        sum(1 for m in rest if m < b_new)
                    )
                    with_b = sorted(rest + (b_new,))
                    for a_new in range(m_modes):
                        if a_new == b_new or a_new in rest_set:
                            continue
                        sign = sign_b * _removal_sign(
                            sum(1 for m in with_b if m < a_new)
                        )
                        row = basis.config_index[tuple(sorted(with_b + [a_new]))]
                        out[a, b, a_new, b_new] += sign * gram[row, col]
    return out / (basis.n_fermions * (basis.n_fermions - 1))


def boson_rdm(state: ManyBodyState) -> np.ndarray:
    """Continuum-kernel boson density N^(-4/3) <a*_k' a_k> / dk^d."""
    basis = get_basis(state.params)
    lowered = [
        apply_annihilation(state, kappa).amp.reshape(-1)
        for kappa in range(basis.n_boson_modes)
    ]
    stack = np.array(lowered)
    pair = stack.conj() @ stack.T  # pair[k', k] = <a_k' psi, a_k psi>
    scale = float(state.params.n_fermions) ** (-4.0 / 3.0) / basis.modes.weight
    return scale * pair.T


def reduced_densities(state: ManyBodyState) -> ReducedDensities:
    return ReducedDensities(
        gamma_f=fermion_rdm1(state),
        gamma_f2=fermion_rdm2(state),
        gamma_b=boson_rdm(state),
    )


def mode_projector(orbitals: np.ndarray, params: ModelParams) -> np.ndarray:
    """Rank-N projector onto the orbital span, in the mode basis."""
    basis = get_basis(params)
    u = basis.grid.orbital_mode_coefficients(orbitals)
    return u @ u.conj().T


def nuclear_norm(matrix: np.ndarray) -> float:
    return float(np.sum(np.linalg.svd(matrix, compute_uv=False)))


def beta_b_direct(
    state: ManyBodyState, alpha: np.ndarray, params: ModelParams
) -> float:
    """N^(1/3) sum_k dk^d ||(N^(-2/3) a_k / dk^(d/2) - alpha_k) psi||^2."""
    basis = get_basis(params)
    weight = basis.modes.weight
    ladder_scale = float(params.n_fermions) ** (-2.0 / 3.0) / np.sqrt(weight)
    acc = 0.0
    for kappa in range(basis.n_boson_modes):
        lowered = apply_annihilation(state, kappa).amp
        mismatch = ladder_scale * lowered - alpha[kappa] * state.amp
        acc += weight * float(np.sum(np.abs(mismatch) ** 2))
    return float(params.n_fermions) ** (1.0 / 3.0) * acc


def beta_report(
    state: ManyBodyState,
    orbitals: np.ndarray,
    alpha: np.ndarray,
    params: ModelParams,
) -> BetaReport:
    """Mean-field distance functionals of a many-body state.

    beta_a1 = 1 - Tr(gamma_f p); beta_a2 = N^(1/3) <q x q> against the
    two-body marginal; beta_b = N^(1/3) sum_k dk^d of the squared ladder
    mismatch. Also reports the trace-norm distances and the margins of the
    inequality chains 2 beta_a1 <= tn_f <= sqrt(8 beta_a1) and
    tn_b <= 3 N^(-1/3) beta_b + 6 ||alpha|| sqrt(N^(-1/3) beta_b).
    """
    basis = get_basis(params)
    n = params.n_fermions
    cbrt_n = float(n) ** (1.0 / 3.0)

    projector = mode_projector(orbitals, params)
    gamma_f = fermion_rdm1(state)
    beta_a1 = float(1.0 - np.einsum("mn,nm->", gamma_f, projector).real)

    q = np.eye(basis.n_modes) - projector
    gamma_f2 = fermion_rdm2(state)
    beta_a2 = cbrt_n * float(
        np.einsum("abcd,ca,db->", gamma_f2, q, q).real
    )

    beta_b = beta_b_direct(state, alpha, params)

    tn_gamma_f = nuclear_norm(gamma_f - projector / n)
    gamma_b = boson_rdm(state)
    coherent_kernel = np.outer(alpha, np.conj(alpha))
    tn_gamma_b = nuclear_norm((gamma_b - coherent_kernel) * basis.modes.weight)

    a_norm = alpha_norm(alpha, params)
    inv_cbrt_beta_b = max(0.0, beta_b) / cbrt_n
    return BetaReport(
        time=state.time,
        beta_a1=beta_a1,
        beta_a2=beta_a2,
        beta_b=beta_b,
        beta_total=beta_a1 + beta_a2 + beta_b,
        tn_gamma_f=tn_gamma_f,
        tn_gamma_b=tn_gamma_b,
        margin_f_lower=tn_gamma_f - 2.0 * beta_a1,
        margin_f_upper=float(np.sqrt(max(0.0, 8.0 * beta_a1))) - tn_gamma_f,
        margin_b=3.0 * inv_cbrt_beta_b
        + 6.0 * a_norm * float(np.sqrt(inv_cbrt_beta_b))
        - tn_gamma_b,
    )


def weyl_number_check(
    state: ManyBodyState, alpha: np.ndarray, params: ModelParams
) -> tuple[float, float, float]:
    """beta_b two ways: direct ladder mismatch vs Weyl-conjugated number.

    The conjugated form is N^(-1) <W* psi, (total number) W* psi> with the
    dense truncated Weyl matrix; on the untruncated space the two agree
    exactly, so the returned gap gauges the truncation.
    """
    from .fock_states import weyl_matrix

    basis = get_basis(params)
    direct = beta_b_direct(state, alpha, params)
    w = weyl_matrix(alpha, params)
    conjugated_amp = state.amp @ w.conj()
    occupancy = basis.occupations.sum(axis=1).astype(float)
    conjugated = float(
        np.sum(occupancy * np.sum(np.abs(conjugated_amp) ** 2, axis=0))
        / params.n_fermions
    )
    return direct, conjugated, abs(direct - conjugated)


def hamiltonian_expectation(state: ManyBodyState, params: ModelParams) -> float:
    h = build_hamiltonian(params)
    flat = state.amp.reshape(-1)
    return float(np.vdot(flat, h @ flat).real)


def shift_expectation(state: ManyBodyState, kappa: int, params: ModelParams) -> complex:
    """<sum_j e^(i k_kappa x_j)> via the interaction's shift operator."""
    shift = interaction_shifts(params)[kappa]
    return complex(np.vdot(state.amp, shift @ state.amp))


def ehrenfest_check(
    states: list[ManyBodyState], params: ModelParams
) -> tuple[np.ndarray, np.ndarray, float]:
    """Second-order field equation residual for the exact dynamics.

    Central-differences <Phi_hat(x)> over uniformly spaced states and
    compares against the analytic wave operator and source expectation.
    Returns (interior times, max-norm residuals, residual relative to the
    source scale). Exact up to time discretization and ceiling truncation.
    """
    basis = get_basis(params)
    modes = basis.modes
    eps = params.kinetic_scale
    delta = params.field_scale
    times = np.array([s.time for s in states])
    spacing = np.diff(times)
    if len(states) < 3:
        raise ConfigError("ehrenfest check needs at least three samples")
    if np.max(np.abs(spacing - spacing[0])) > 1e-9 * max(1.0, abs(spacing[0])):
        raise ConfigError("ehrenfest check needs uniform sample spacing")
    h = float(spacing[0])

    root_weight = np.sqrt(modes.weight)
    ladder_means = np.array(
        [
            [
                annihilation_expectation(s, kappa)
                for kappa in range(basis.n_boson_modes)
            ]
            for s in states
        ]
    )
    field_means = np.array(
        [field_from_alpha(row / root_weight, params) for row in ladder_means]
    )
    shift_means = np.array(
        [
            [shift_expectation(s, kappa, params) for kappa in range(basis.n_boson_modes)]
            for s in states
        ]
    )

    residuals = np.empty(len(states) - 2)
    source_scale = 0.0
    for i in range(1, len(states) - 1):
        ddt2 = (field_means[i + 1] - 2.0 * field_means[i] + field_means[i - 1]) / h**2
        wave = eps**2 * delta**2 * field_from_alpha(
            modes.omega**2 * ladder_means[i] / root_weight, params
        )
        source = (
            -float(params.n_fermions) ** (-2.0 / 3.0)
            * delta
            * (2.0 * np.pi) ** (-params.dim)
            * modes.mode_sum(shift_means[i][modes.neg_index]).real
        )
        residuals[i - 1] = float(np.max(np.abs(ddt2 + wave - source)))
        source_scale = max(source_scale, float(np.max(np.abs(source))))
    relative = float(np.max(residuals) / max(source_scale, 1e-300))
    return times[1:-1], residuals, relative
