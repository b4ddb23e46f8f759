"""Reduced densities and beta functionals against first-quantized oracles."""

import numpy as np
import pytest

from nelsonmf.errors import ConfigError
from nelsonmf.fock_basis import (
    ManyBodyState,
    get_basis,
    number_expectations,
)
from nelsonmf.fock_observables import (
    beta_b_direct,
    beta_report,
    boson_rdm,
    ehrenfest_check,
    fermion_rdm1,
    fermion_rdm2,
    hamiltonian_expectation,
    mode_projector,
    nuclear_norm,
    reduced_densities,
    shift_expectation,
    weyl_number_check,
)
from nelsonmf.fock_states import prepare_slater_coherent
from nelsonmf.grids import get_grid, get_modes
from nelsonmf.params import ModelParams
from nelsonmf.skg import build_fermi_ball

import oracles

PARAMS = ModelParams(grid_points=8, n_fermions=2, cutoff=1.0, fock_n_max=2)


def random_state(params: ModelParams, seed: int) -> ManyBodyState:
    basis = get_basis(params)
    rng = np.random.default_rng(seed)
    amp = rng.standard_normal((basis.n_fermi, basis.n_bose)) + 1j * rng.standard_normal(
        (basis.n_fermi, basis.n_bose)
    )
    amp /= np.linalg.norm(amp)
    return ManyBodyState(amp, params)


def random_orbitals(params: ModelParams, seed: int) -> np.ndarray:
    grid = get_grid(params)
    rng = np.random.default_rng(seed)
    raw = rng.standard_normal((grid.size, params.n_fermions)) + 1j * rng.standard_normal(
        (grid.size, params.n_fermions)
    )
    q, _ = np.linalg.qr(raw)
    return (q.T / np.sqrt(grid.dx_d)).reshape((params.n_fermions,) + grid.shape)


def single_mode_alpha(params: ModelParams, amp: complex) -> np.ndarray:
    modes = get_modes(params)
    alpha = np.zeros(modes.count, dtype=complex)
    alpha[modes.mode_position((1,))] = amp
    return alpha


@pytest.mark.parametrize("seed", [0, 1])
def test_marginals_match_slot_expansion(seed):
    state = random_state(PARAMS, seed)
    np.testing.assert_allclose(
        fermion_rdm1(state), oracles.first_quantized_rdm1(state), atol=1e-12
    )
    np.testing.assert_allclose(
        fermion_rdm2(state), oracles.first_quantized_rdm2(state), atol=1e-12
    )


def test_marginal_traces_and_positivity():
    state = random_state(PARAMS, 2)
    densities = reduced_densities(state)
    assert abs(np.trace(densities.gamma_f) - 1.0) < 1e-12
    assert np.min(np.linalg.eigvalsh(densities.gamma_f)) > -1e-12
    # Pauli bound in the trace-1 convention.
    assert np.max(np.linalg.eigvalsh(densities.gamma_f)) <= 1.0 / 2 + 1e-12
    pair_trace = np.einsum("abab->", densities.gamma_f2)
    assert abs(pair_trace - 1.0) < 1e-12
    # Lattice trace of the boson kernel counts photons.
    expected = 2.0 ** (-4.0 / 3.0) * np.sum(number_expectations(state))
    lattice_trace = np.trace(densities.gamma_b) * get_modes(PARAMS).weight
    assert abs(lattice_trace - expected) < 1e-12


def test_slater_state_gives_projector_marginals():
    orbitals = random_orbitals(PARAMS, 3)
    state = prepare_slater_coherent(
        orbitals, np.zeros(get_modes(PARAMS).count), PARAMS
    )
    p = mode_projector(orbitals, PARAMS)
    np.testing.assert_allclose(fermion_rdm1(state), p / 2.0, atol=1e-13)
    wedge = np.einsum("ac,bd->abcd", p, p) - np.einsum("ad,bc->abcd", p, p)
    np.testing.assert_allclose(fermion_rdm2(state), wedge / 2.0, atol=1e-12)


def test_coherent_state_gives_rank_one_boson_kernel():
    alpha = single_mode_alpha(PARAMS, 0.05)
    state = prepare_slater_coherent(build_fermi_ball(PARAMS), alpha, PARAMS)
    kernel = boson_rdm(state)
    np.testing.assert_allclose(
        kernel, np.outer(alpha, alpha.conj()), atol=1e-6
    )


def test_beta_vanishes_on_the_reference_product_state():
    alpha = single_mode_alpha(PARAMS, 0.05)
    orbitals = random_orbitals(PARAMS, 4)
    state = prepare_slater_coherent(orbitals, alpha, PARAMS)
    report = beta_report(state, orbitals, alpha, PARAMS)
    assert report.beta_a1 < 1e-10
    assert report.beta_a2 < 1e-10
    # beta_b sees only the coherent truncation tail.
    assert 0.0 <= report.beta_b < 1e-6
    assert report.beta_total < 1e-6
    for margin in (
        report.margin_f_lower,
        report.margin_f_upper,
        report.margin_b,
    ):
        assert margin > -1e-8


def test_beta_nonnegative_on_random_states():
    alpha = single_mode_alpha(PARAMS, 0.05)
    orbitals = random_orbitals(PARAMS, 5)
    for seed in range(6, 11):
        state = random_state(PARAMS, seed)
        report = beta_report(state, orbitals, alpha, PARAMS)
        assert report.beta_a1 > -1e-12
        assert report.beta_a2 > -1e-12
        assert report.beta_b >= 0.0
        # The two-sided trace-norm control needs smallness; only the lower
        # half is unconditional.
        assert report.margin_f_lower > -1e-12


def test_beta_b_measures_displacement_mismatch():
    alpha = single_mode_alpha(PARAMS, 0.05)
    state = prepare_slater_coherent(build_fermi_ball(PARAMS), alpha, PARAMS)
    matched = beta_b_direct(state, alpha, PARAMS)
    displaced = beta_b_direct(state, 2.0 * alpha, PARAMS)
    # ||(a_scaled - 2 alpha) psi||^2 ~ |alpha|^2 dk N^(1/3) at the probed mode.
    modes = get_modes(PARAMS)
    kappa = modes.mode_position((1,))
    predicted = (
        2.0 ** (1.0 / 3.0) * modes.weight * abs(alpha[kappa]) ** 2
    )
    assert matched < 1e-6
    assert abs(displaced - predicted) < 1e-4
    assert displaced > 100 * matched


def test_weyl_conjugation_agrees_with_direct_form():
    alpha = single_mode_alpha(PARAMS, 0.05)
    state = prepare_slater_coherent(build_fermi_ball(PARAMS), alpha, PARAMS)
    direct, conjugated, gap = weyl_number_check(state, alpha, PARAMS)
    assert gap < 1e-6
    assert direct >= 0.0 and conjugated >= 0.0


def test_shift_expectation_matches_grid_integral():
    orbitals = random_orbitals(PARAMS, 12)
    state = prepare_slater_coherent(
        orbitals, np.zeros(get_modes(PARAMS).count), PARAMS
    )
    grid = get_grid(PARAMS)
    modes = get_modes(PARAMS)
    for kappa in range(modes.count):
        wave = np.exp(1j * modes.k[kappa, 0] * grid.x_axis)
        direct = sum(
            grid.dx_d * np.vdot(orbitals[j], wave * orbitals[j])
            for j in range(2)
        )
        assert abs(shift_expectation(state, kappa, PARAMS) - direct) < 1e-11


def test_hamiltonian_expectation_is_real_quadratic_form():
    state = random_state(PARAMS, 13)
    value = hamiltonian_expectation(state, PARAMS)
    assert isinstance(value, float)
    doubled = ManyBodyState(np.sqrt(2.0) * state.amp, PARAMS)
    assert abs(hamiltonian_expectation(doubled, PARAMS) - 2.0 * value) < 1e-9


def test_nuclear_norm_of_known_matrix():
    m = np.diag([3.0, -4.0])
    assert abs(nuclear_norm(m) - 7.0) < 1e-14


def test_ehrenfest_check_validates_sampling():
    state = random_state(PARAMS, 14)
    with pytest.raises(ConfigError):
        ehrenfest_check([state, state], PARAMS)
    a, b, c = state.copy(), state.copy(), state.copy()
    a.time, b.time, c.time = 0.0, 0.1, 0.35
    with pytest.raises(ConfigError):
        ehrenfest_check([a, b, c], PARAMS)
    c.time = 0.2
    times, residuals, relative = ehrenfest_check([a, b, c], PARAMS)
    assert times.shape == (1,) and residuals.shape == (1,)
    assert np.all(np.isfinite(residuals)) and np.isfinite(relative)
