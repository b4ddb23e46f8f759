"""Trace-norm diagnostics of Slater projectors.

Everything here exploits that p = sum_j |phi_j><phi_j| has rank N: for an
operator A, the nonzero singular values of q A p are the square roots of
the eigenvalues of the N x N Gram matrix of the vectors q A phi_j,

    M_ij = <A phi_i, A phi_j> - <A phi_i, p A phi_j>,

so no grid-sized matrix is ever materialized. For unitary multiplication
operators ||p A q||_Tr = ||q A p||_Tr (q A p A* q and p A q A* p share
their spectrum via B B* vs B* B with B = p A p), which the dense-SVD
oracle in the test suite confirms; the commutator [p, A] = pAq - qAp has
orthogonal blocks, so its trace norm is the sum of the two block norms.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import NumericalError
from .grids import get_grid
from .params import ModelParams

PSD_CLIP = 1.0e-12


class SlaterProjector:
    """Rank-N orthogonal projector onto the span of an orbital family."""

    def __init__(self, orbitals: np.ndarray, params: ModelParams):
        self.params = params
        self.grid = get_grid(params)
        self.n = orbitals.shape[0]
        self.orbitals = orbitals
        self.flat = orbitals.reshape(self.n, -1)

    def overlaps(self, vectors: np.ndarray) -> np.ndarray:
        """<phi_j, v_i> for a batch of flattened vectors, shape (N, n_vec)."""
        return self.grid.dx_d * (self.flat.conj() @ vectors.T)

    def q_gram(self, vectors: np.ndarray) -> np.ndarray:
        """Gram matrix <v_i, q v_j> of a flattened batch."""
        full = self.grid.dx_d * (vectors.conj() @ vectors.T)
        c = self.overlaps(vectors)
        return full - c.conj().T @ c


def _trace_norm_from_gram(gram: np.ndarray) -> float:
    eigenvalues = np.linalg.eigvalsh(gram)
    floor = -PSD_CLIP * max(1.0, float(np.max(np.abs(eigenvalues), initial=0.0)))
    if eigenvalues.size and eigenvalues[0] < floor:
        raise NumericalError(
            f"Gram matrix non-PSD beyond tolerance (min eigenvalue {eigenvalues[0]:.3e})"
        )
    return float(np.sum(np.sqrt(np.clip(eigenvalues, 0.0, None))))


def phase_grid(k: np.ndarray, params: ModelParams) -> np.ndarray:
    """e^(i k x) on the grid for an arbitrary wave vector k."""
    grid = get_grid(params)
    k = np.atleast_1d(np.asarray(k, dtype=float))
    out = np.ones(grid.shape, dtype=complex)
    for axis in range(grid.dim):
        shape_ax = [1] * grid.dim
        shape_ax[axis] = grid.n
        out = out * np.exp(1j * k[axis] * grid.x_axis).reshape(shape_ax)
    return out


def _gradient(orbitals: np.ndarray, params: ModelParams) -> np.ndarray:
    """Per-axis derivatives, shape (dim, N, grid_size), flattened."""
    grid = get_grid(params)
    axes = tuple(range(1, grid.dim + 1))
    hat = np.fft.fftn(orbitals.reshape((-1,) + grid.shape), axes=axes)
    out = np.empty((grid.dim,) + hat.shape, dtype=complex)
    for axis in range(grid.dim):
        shape_ax = [1] * grid.dim
        shape_ax[axis] = grid.n
        multiplier = (1j * grid.k_axis).reshape(shape_ax)
        out[axis] = np.fft.ifftn(multiplier * hat, axes=axes)
    return out.reshape(grid.dim, orbitals.shape[0], -1)


def trace_norm_p_phase_q(proj: SlaterProjector, k: np.ndarray) -> float:
    """||p e^(ikx) q||_Tr via the rank-N Gram route."""
    vectors = (phase_grid(k, proj.params).reshape(-1) * proj.flat)
    return _trace_norm_from_gram(proj.q_gram(vectors))


def hs_norm_p_phase_q(proj: SlaterProjector, k: np.ndarray) -> float:
    """||p e^(ikx) q||_HS = sqrt(trace of the same Gram matrix)."""
    vectors = (phase_grid(k, proj.params).reshape(-1) * proj.flat)
    return float(np.sqrt(max(0.0, float(np.trace(proj.q_gram(vectors)).real))))


def commutator_trace_norm(proj: SlaterProjector, k: np.ndarray) -> float:
    """||[p, e^(ikx)]||_Tr.

    The commutator splits as pAq - qAp with mutually orthogonal ranges and
    supports; its 2N nonzero singular values are the union of the two
    N-blocks', so the norm is the sum of the +k and -k Gram routes.
    """
    k = np.atleast_1d(np.asarray(k, dtype=float))
    return trace_norm_p_phase_q(proj, k) + trace_norm_p_phase_q(proj, -k)


def trace_norm_p_grad_q(proj: SlaterProjector) -> float:
    """||p grad q||_Tr with the gradient read as a map into d stacked copies.

    The map (p grad q) v = (p d_a q v)_a has rank at most d N and its
    squared singular values are the eigenvalues of the full cross-axis
    Gram matrix <q d_a phi_i, q d_b phi_j> (both anti-Hermitian derivative
    factors flip sign, so the q-projected gradient batch carries them).
    """
    components = _gradient(proj.orbitals, proj.params)
    batch = components.reshape(-1, components.shape[-1])
    return _trace_norm_from_gram(proj.q_gram(batch))


def diagonalize_p_cos(
    proj: SlaterProjector, k: np.ndarray
) -> tuple[np.ndarray, np.ndarray]:
    """Eigenpairs of p cos(kx) p on ran p.

    Returns (eigenvalues ascending, rotated orbitals) where the rotated
    family is orthonormal, spans ran p, and satisfies |lambda_j| <= 1 with
    sum_j lambda_j = int cos(ky) rho(y) dy.
    """
    cos_grid = phase_grid(k, proj.params).real.reshape(-1)
    vectors = cos_grid * proj.flat
    matrix = proj.grid.dx_d * (proj.flat.conj() @ vectors.T)
    matrix = 0.5 * (matrix + matrix.conj().T)
    eigenvalues, rotation = np.linalg.eigh(matrix)
    rotated = (rotation.T @ proj.flat).reshape(proj.orbitals.shape)
    return eigenvalues, rotated


@dataclass
class ScanRow:
    time: float
    k_abs: float
    tn_peq: float
    tn_commutator: float
    tn_pgradq: float
    hs_peq: float


def semiclassical_scan(
    states: list, k_list: np.ndarray, params: ModelParams
) -> list[ScanRow]:
    """Trace-norm structure along a trajectory for each probe wave vector.

    states: anything with .orbitals and .time (SkgState works). The
    invariants hs^2 <= tn and tn_peq <= tn_commutator hold row-wise; the
    gradient norm is k-independent and repeated per row for the table.
    """
    # reshape rather than atleast_2d: an empty list must yield zero probe
    # rows, not a single zero-length wave vector.
    k_list = np.asarray(k_list, dtype=float).reshape(-1, params.dim)
    rows: list[ScanRow] = []
    for state in states:
        proj = SlaterProjector(state.orbitals, params)
        tn_grad = trace_norm_p_grad_q(proj)
        for k in k_list:
            rows.append(
                ScanRow(
                    time=float(state.time),
                    k_abs=float(np.linalg.norm(k)),
                    tn_peq=trace_norm_p_phase_q(proj, k),
                    tn_commutator=commutator_trace_norm(proj, k),
                    tn_pgradq=tn_grad,
                    hs_peq=hs_norm_p_phase_q(proj, k),
                )
            )
    return rows


def projector_trace_distance(
    orbitals_a: np.ndarray, orbitals_b: np.ndarray, params: ModelParams
) -> float:
    """||p_a - p_b||_Tr via the rank <= 2N block on the joint span."""
    grid = get_grid(params)
    scale = np.sqrt(grid.dx_d)
    a = orbitals_a.reshape(orbitals_a.shape[0], -1) * scale
    b = orbitals_b.reshape(orbitals_b.shape[0], -1) * scale
    stacked = np.vstack([a, b])
    _, singular, basis = np.linalg.svd(stacked, full_matrices=False)
    rank = int(np.sum(singular > 1e-12 * max(1.0, singular[0])))
    basis = basis[:rank]
    ca = basis.conj() @ a.T
    cb = basis.conj() @ b.T
    block = ca @ ca.conj().T - cb @ cb.conj().T
    return float(np.sum(np.abs(np.linalg.eigvalsh(block))))
