"""Unitary propagation of truncated many-body states.

propagate applies e^(-i N^(-1/3) H (t - state.time)). Above the dense
threshold a Lanczos scheme with full reorthogonalization and adaptive
substeps is used; at or below it the Hamiltonian is diagonalized once and
cached. Both code paths are exposed so they can be cross-checked.
"""

from __future__ import annotations

import logging
from functools import lru_cache

import numpy as np
import scipy.linalg

from .errors import ConfigError, NumericalError
from .fock_basis import ManyBodyState, get_basis
from .fock_hamiltonian import build_hamiltonian
from .params import ModelParams

logger = logging.getLogger(__name__)

DENSE_DIM_LIMIT = 2000
KRYLOV_SPACE = 40
KRYLOV_TOL = 1.0e-12


def _lanczos_factorization(matvec, start: np.ndarray, m: int):
    """m-step Lanczos with twice-applied full reorthogonalization.

    Returns (basis, diag, offdiag, next_coupling); next_coupling is the
    residual coefficient beta_(m+1), zero on an invariant subspace.
    """
    dim = start.size
    m = min(m, dim)
    basis = np.empty((m, dim), dtype=complex)
    diag = np.empty(m)
    offdiag = np.empty(max(m - 1, 0))
    basis[0] = start
    for j in range(m):
        w = matvec(basis[j])
        diag[j] = float(np.vdot(basis[j], w).real)
        w = w - diag[j] * basis[j]
        if j > 0:
            w = w - offdiag[j - 1] * basis[j - 1]
        for _ in range(2):
            overlaps = basis[: j + 1].conj() @ w
            w = w - basis[: j + 1].T @ overlaps
        coupling = float(np.linalg.norm(w))
        if j == m - 1:
            return basis, diag, offdiag, coupling
        if coupling < 1e-14:
            return basis[: j + 1], diag[: j + 1], offdiag[:j], 0.0
        offdiag[j] = coupling
        basis[j + 1] = w / coupling
    raise AssertionError("unreachable")


def _tridiag_expm_column(diag, offdiag, tau: float) -> np.ndarray:
    """First column of e^(-i tau T) for real symmetric tridiagonal T."""
    if diag.size == 1:
        return np.exp(-1j * tau * diag[:1])
    w, vecs = scipy.linalg.eigh_tridiagonal(diag, offdiag)
    return vecs @ (np.exp(-1j * tau * w) * vecs[0].conj())


def lanczos_expm_apply(
    matvec,
    vector: np.ndarray,
    theta: float,
    tol: float = KRYLOV_TOL,
    space: int = KRYLOV_SPACE,
) -> np.ndarray:
    """e^(-i theta A) vector for Hermitian A given as a matvec.

    Substeps adapt by halving until the discrepancy between the full
    Krylov solution and one eight vectors shorter falls under the error
    budget allotted to the substep.
    """
    if theta == 0.0:
        return vector.copy()
    norm0 = float(np.linalg.norm(vector))
    if norm0 == 0.0:
        return vector.copy()
    y = vector.copy()
    remaining = float(theta)
    while remaining > 0.0:
        beta = float(np.linalg.norm(y))
        basis, diag, offdiag, coupling = _lanczos_factorization(
            matvec, y / beta, space
        )
        m = diag.size
        tau = remaining
        while True:
            column = _tridiag_expm_column(diag, offdiag, tau)
            if coupling == 0.0 or m <= 8:
                error = coupling * abs(column[-1]) * tau * beta
            else:
                short = m - 8
                column_short = _tridiag_expm_column(
                    diag[:short], offdiag[: short - 1], tau
                )
                error = beta * float(
                    np.linalg.norm(
                        np.concatenate([column[:short] - column_short, column[short:]])
                    )
                )
            if error <= tol * norm0 * (tau / theta) or tau < 1e-12 * theta:
                break
            tau *= 0.5
        if tau < 1e-12 * theta and error > tol * norm0 * (tau / theta):
            raise NumericalError("Krylov propagation failed to reach tolerance")
        y = beta * (basis.T @ column)
        remaining -= tau
    return y


@lru_cache(maxsize=8)
def _dense_eigensystem(params: ModelParams):
    h = build_hamiltonian(params).toarray()
    return scipy.linalg.eigh(h)


def propagate(
    state: ManyBodyState,
    t_final: float,
    params: ModelParams,
    method: str = "auto",
    tol: float = KRYLOV_TOL,
) -> ManyBodyState:
    """Evolve to absolute time t_final under e^(-i N^(-1/3) H t)."""
    duration = t_final - state.time
    if duration < 0:
        raise NumericalError("propagate cannot run backwards")
    basis = get_basis(params)
    theta = params.kinetic_scale * duration
    if method == "auto":
        method = "dense" if basis.dim <= DENSE_DIM_LIMIT else "krylov"
    flat = state.amp.reshape(-1)
    if method == "dense":
        if basis.dim > DENSE_DIM_LIMIT:
            raise ConfigError(
                f"dense propagation caps at dimension {DENSE_DIM_LIMIT}, "
                f"got {basis.dim}; use the iterative method"
            )
        w, u = _dense_eigensystem(params)
        flat = u @ (np.exp(-1j * theta * w) * (u.conj().T @ flat))
    elif method == "krylov":
        h = build_hamiltonian(params)
        flat = lanczos_expm_apply(lambda x: h @ x, flat, theta, tol=tol)
    else:
        raise ValueError(f"unknown propagation method {method!r}")
    amp = flat.reshape(state.amp.shape)
    if not np.all(np.isfinite(amp.view(float))):
        raise NumericalError("non-finite amplitudes after propagation")
    return ManyBodyState(amp, params, t_final, state.truncation_loss)
