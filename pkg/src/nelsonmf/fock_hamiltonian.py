"""Many-body Hamiltonian on the truncated basis.

    H = sum_j (-Lap_j) + sum_j Phi_hat(x_j) + delta H_field

in second quantization over grid momentum modes: the kinetic term is
diagonal (sum of |k|^2 over occupied modes), the field term is diagonal
(sum of omega n_kappa), and the interaction couples a fermion momentum
transfer +k to one boson annihilation (or -k to one creation) with matrix
element eta(k) dk^(d/2). Momentum transfer wraps modulo the reciprocal
lattice, exactly like pointwise multiplication by a potential on the grid,
so this is the second quantization of the same lattice model the effective
solver integrates. The Schroedinger equation carries the N^(-1/3) scale:
propagation uses the generator -i N^(-1/3) H t.
"""

from __future__ import annotations

from functools import lru_cache

import numpy as np
import scipy.sparse as sp

from .fock_basis import FockBasis, get_basis
from .params import ModelParams


def _removal_sign(config: tuple, position: int) -> int:
    return -1 if position % 2 else 1


def one_body_shift(basis: FockBasis, shift_int: tuple) -> sp.csr_matrix:
    """Second-quantized sum_j e^(i k x_j): c*_(q+k) c_q summed over modes.

    shift_int is the integer lattice coordinate of k; arithmetic wraps into
    the fft frequency range per axis.
    """
    grid = basis.grid
    n = grid.n
    rows, cols, vals = [], [], []
    for col, config in enumerate(basis.configs):
        occupied = set(config)
        for pos, q in enumerate(config):
            target_coords = tuple(
                (int(c) + int(s) + n // 2) % n - n // 2
                for c, s in zip(grid.modes_int[q], shift_int)
            )
            t = grid.mode_index[target_coords]
            if t == q:
                rows.append(col)
                cols.append(col)
                vals.append(1.0)
                continue
            if t in occupied:
                continue
            sign = _removal_sign(config, pos)
            remaining = [m for m in config if m != q]
            insert_at = sum(1 for m in remaining if m < t)
            sign *= _removal_sign(tuple(remaining), insert_at)
            new_config = tuple(sorted(remaining + [t]))
            rows.append(basis.config_index[new_config])
            cols.append(col)
            vals.append(float(sign))
    return sp.csr_matrix(
        (vals, (rows, cols)), shape=(basis.n_fermi, basis.n_fermi)
    )


def one_body_operator(basis: FockBasis, matrix: np.ndarray) -> np.ndarray:
    """Dense second quantization dGamma(A) = sum A[t, q] c*_t c_q."""
    out = np.zeros((basis.n_fermi, basis.n_fermi), dtype=complex)
    for col, config in enumerate(basis.configs):
        occupied = set(config)
        for pos, q in enumerate(config):
            out[col, col] += matrix[q, q]
            sign_q = _removal_sign(config, pos)
            remaining = [m for m in config if m != q]
            for t in range(basis.n_modes):
                if t == q or t in occupied or matrix[t, q] == 0.0:
                    continue
                insert_at = sum(1 for m in remaining if m < t)
                sign = sign_q * _removal_sign(tuple(remaining), insert_at)
                row = basis.config_index[tuple(sorted(remaining + [t]))]
                out[row, col] += sign * matrix[t, q]
    return out


@lru_cache(maxsize=32)
def interaction_shifts(params: ModelParams) -> tuple:
    """One fermion shift matrix per retained boson mode, canonical order."""
    basis = get_basis(params)
    return tuple(
        one_body_shift(basis, tuple(coords)) for coords in basis.modes.int_coords
    )


@lru_cache(maxsize=16)
def build_hamiltonian(params: ModelParams) -> sp.csr_matrix:
    """Sparse H on the product basis; Hermitian by construction (X + X*)."""
    basis = get_basis(params)
    modes = basis.modes
    coupling = modes.form_factor * np.sqrt(modes.weight)
    diagonal = (
        basis.config_kinetic[:, None]
        + params.field_scale * basis.boson_energy[None, :]
    ).reshape(-1)
    h = sp.diags(diagonal).tocsr()
    lower = sp.csr_matrix((basis.dim, basis.dim))
    for kappa in range(basis.n_boson_modes):
        shift = interaction_shifts(params)[kappa]
        lower = lower + coupling[kappa] * sp.kron(
            shift, basis.ladder_down(kappa), format="csr"
        )
    h = h + lower + lower.conj().T.tocsr()
    return h.tocsr()
