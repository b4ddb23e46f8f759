"""Truncated product basis: enumeration, ladder algebra, truncation gauge."""

import math

import numpy as np
import pytest

from nelsonmf.errors import BudgetError
from nelsonmf.fock_basis import (
    FockBasis,
    ManyBodyState,
    annihilation_expectation,
    apply_annihilation,
    apply_creation,
    basis_dimension,
    get_basis,
    number_expectations,
)
from nelsonmf.params import ModelParams

PARAMS = ModelParams(grid_points=8, n_fermions=2, cutoff=1.0, fock_n_max=2)


def random_state(params: ModelParams, seed: int) -> ManyBodyState:
    basis = get_basis(params)
    rng = np.random.default_rng(seed)
    amp = rng.standard_normal((basis.n_fermi, basis.n_bose)) + 1j * rng.standard_normal(
        (basis.n_fermi, basis.n_bose)
    )
    amp /= np.linalg.norm(amp)
    return ManyBodyState(amp, params)


def test_enumeration_counts():
    basis = get_basis(PARAMS)
    assert basis.n_boson_modes == 3
    assert basis.n_fermi == math.comb(8, 2)
    assert basis.n_bose == 27
    assert basis.dim == basis_dimension(PARAMS) == 28 * 27
    assert len(basis.configs) == basis.n_fermi
    assert basis.occupations.shape == (27, 3)
    assert np.all(basis.occupations >= 0) and np.all(basis.occupations <= 2)
    for i in range(basis.n_bose):
        assert basis.boson_index(basis.occupations[i]) == i


def test_configs_are_sorted_unique():
    basis = get_basis(PARAMS)
    seen = set()
    for config in basis.configs:
        assert config == tuple(sorted(config))
        assert config not in seen
        seen.add(config)


def test_hard_cap_refuses_huge_bases():
    big = ModelParams(grid_points=16, n_fermions=8, fock_n_max=3)
    assert basis_dimension(big) > 5_000_000
    with pytest.raises(BudgetError):
        FockBasis(big)


def test_ladder_matrices_match_operator_application():
    basis = get_basis(PARAMS)
    state = random_state(PARAMS, 0)
    for mode in range(basis.n_boson_modes):
        sparse_route = state.amp @ basis.ladder_down(mode).T.toarray()
        np.testing.assert_allclose(
            apply_annihilation(state, mode).amp, sparse_route, atol=1e-14
        )
        sparse_up = state.amp @ basis.ladder_up(mode).T.toarray()
        np.testing.assert_allclose(
            apply_creation(state, mode).amp, sparse_up, atol=1e-14
        )


def test_annihilators_commute_everywhere():
    basis = get_basis(PARAMS)
    state = random_state(PARAMS, 1)
    for kappa in range(basis.n_boson_modes):
        for lam in range(basis.n_boson_modes):
            ab = apply_annihilation(apply_annihilation(state, lam), kappa)
            ba = apply_annihilation(apply_annihilation(state, kappa), lam)
            assert np.array_equal(ab.amp, ba.amp)


def test_canonical_commutator_below_the_ceiling():
    # [a_kappa, a_lambda*] = delta on states with every occupation < n_max;
    # at the ceiling the creation half is truncated by construction.
    basis = get_basis(PARAMS)
    state = random_state(PARAMS, 2)
    below = np.all(basis.occupations < basis.n_max, axis=1)
    amp = state.amp * below[None, :]
    amp /= np.linalg.norm(amp)
    state = ManyBodyState(amp, PARAMS)
    for kappa in range(basis.n_boson_modes):
        for lam in range(basis.n_boson_modes):
            up_down = apply_annihilation(apply_creation(state, lam), kappa)
            down_up = apply_creation(apply_annihilation(state, kappa), lam)
            delta = 1.0 if kappa == lam else 0.0
            np.testing.assert_allclose(
                up_down.amp - down_up.amp, delta * state.amp, atol=1e-13
            )


def test_ceiling_commutator_defect_is_the_documented_one():
    # A single ceiling configuration: a a* kills it (the raised weight is
    # dropped) while a* a returns n_max of it, so [a, a*] acts as -n_max.
    basis = get_basis(PARAMS)
    amp = np.zeros((basis.n_fermi, basis.n_bose))
    ceiling = basis.boson_index([basis.n_max, 0, 0])
    amp[0, ceiling] = 1.0
    state = ManyBodyState(amp, PARAMS)
    up_down = apply_annihilation(apply_creation(state, 0), 0)
    down_up = apply_creation(apply_annihilation(state, 0), 0)
    np.testing.assert_allclose(
        up_down.amp - down_up.amp, -basis.n_max * state.amp, atol=1e-13
    )


def test_creation_accounts_for_dropped_weight():
    basis = get_basis(PARAMS)
    state = random_state(PARAMS, 3)
    occupancy = number_expectations(state)
    for mode in range(basis.n_boson_modes):
        raised = apply_creation(state, mode)
        kept = np.linalg.norm(raised.amp) ** 2
        # ||a* psi||^2 would be 1 + <n_mode> without the ceiling.
        assert abs(kept + raised.truncation_loss - (1.0 + occupancy[mode])) < 1e-12
        assert raised.truncation_loss > 0.0


def test_number_expectation_via_ladder_route():
    state = random_state(PARAMS, 4)
    basis = get_basis(PARAMS)
    occupancy = number_expectations(state)
    for mode in range(basis.n_boson_modes):
        lowered = apply_annihilation(state, mode)
        assert abs(occupancy[mode] - np.linalg.norm(lowered.amp) ** 2) < 1e-12
        sparse = basis.ladder_down(mode)
        direct = complex(np.vdot(state.amp, state.amp @ sparse.T.toarray()))
        assert abs(annihilation_expectation(state, mode) - direct) < 1e-13
