"""Field-sector primitives: dispersion, form factor, field reconstruction.

alpha arrays hold continuum samples alpha(k_kappa) in the canonical retained-
mode order; lattice quadrature supplies the dk^d weights, so the discrete
coefficient of one mode is alpha(k_kappa) * dk^(d/2).
"""

from __future__ import annotations

import numpy as np

from .grids import get_grid, get_modes
from .params import ModelParams


def dispersion(k: np.ndarray, boson_mass: float) -> np.ndarray:
    """omega(k) = sqrt(|k|^2 + m^2); k has shape (..., dim)."""
    k = np.asarray(k, dtype=float)
    k2 = np.sum(k * k, axis=-1)
    return np.sqrt(k2 + boson_mass**2)


def form_factor(k: np.ndarray, boson_mass: float, cutoff: float, dim: int) -> np.ndarray:
    """(2*pi)^(-d/2) / sqrt(2*omega(k)) inside |k| <= cutoff, zero outside."""
    k = np.asarray(k, dtype=float)
    omega = dispersion(k, boson_mass)
    inside = np.sum(k * k, axis=-1) <= cutoff**2 + 1e-12
    out = np.zeros_like(omega)
    np.divide(
        (2.0 * np.pi) ** (-dim / 2.0),
        np.sqrt(2.0 * omega, where=inside, out=np.ones_like(omega)),
        where=inside,
        out=out,
    )
    return out


def field_from_alpha(alpha: np.ndarray, params: ModelParams) -> np.ndarray:
    """Real field Phi(x) = sum_k dk^d eta(k) (e^(ikx) alpha_k + c.c.).

    The conjugate half equals the conjugate of the direct half because the
    retained set is +/-symmetric, so one lattice scatter and one fft suffice.
    The imaginary residue is structural roundoff and is discarded.
    """
    modes = get_modes(params)
    half = modes.mode_sum(modes.form_factor * alpha)
    return np.ascontiguousarray(2.0 * half.real)


def density(orbitals: np.ndarray) -> np.ndarray:
    """Total position density sum_j |phi_j|^2 on the grid."""
    return np.sum(np.abs(orbitals) ** 2, axis=0)


def fourier_density(rho: np.ndarray, params: ModelParams) -> np.ndarray:
    """F[rho](k) at the retained modes."""
    modes = get_modes(params)
    return get_grid(params).forward(rho)[modes.fft_addresses]
