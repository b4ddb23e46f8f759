"""Iterative propagation against dense and scipy references."""

import numpy as np
import pytest

from nelsonmf.errors import ConfigError, NumericalError
from nelsonmf.fock_basis import ManyBodyState, get_basis
from nelsonmf.fock_hamiltonian import build_hamiltonian
from nelsonmf.krylov import lanczos_expm_apply, propagate
from nelsonmf.params import ModelParams

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


@pytest.mark.parametrize("seed", [0, 1])
def test_lanczos_matches_dense_exponential(seed):
    rng = np.random.default_rng(seed)
    n = 120
    raw = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
    h = 0.5 * (raw + raw.conj().T)
    v = rng.standard_normal(n) + 1j * rng.standard_normal(n)
    for theta in [0.3, 2.7]:
        fast = lanczos_expm_apply(lambda x: h @ x, v, theta)
        ref = oracles.dense_expm_apply(h, v, theta)
        assert np.linalg.norm(fast - ref) < 1e-9 * np.linalg.norm(v)


def test_lanczos_handles_invariant_subspace():
    # Start vector = eigenvector: the Krylov space closes after one step.
    h = np.diag(np.array([1.0, 2.0, 5.0]))
    v = np.array([0.0, 1.0, 0.0], dtype=complex)
    out = lanczos_expm_apply(lambda x: h @ x, v, 1.3)
    np.testing.assert_allclose(out, np.exp(-1.3j * 2.0) * v, atol=1e-13)


def test_zero_angle_is_identity():
    v = np.arange(5, dtype=complex)
    out = lanczos_expm_apply(lambda x: 2.0 * x, v, 0.0)
    np.testing.assert_array_equal(out, v)


def test_propagate_routes_agree():
    state = random_state(PARAMS, 2)
    dense = propagate(state, 0.5, PARAMS, method="dense")
    krylov = propagate(state, 0.5, PARAMS, method="krylov")
    assert np.linalg.norm(dense.amp - krylov.amp) < 1e-8
    assert abs(dense.norm() - 1.0) < 1e-12
    assert dense.time == krylov.time == 0.5


def test_propagate_scales_the_generator():
    # theta = N^(-1/3) t: check against scipy on the sparse matrix.
    state = random_state(PARAMS, 3)
    out = propagate(state, 0.3, PARAMS, method="dense")
    h = build_hamiltonian(PARAMS).toarray()
    ref = oracles.dense_expm_apply(
        h, state.amp.reshape(-1), PARAMS.kinetic_scale * 0.3
    )
    assert np.linalg.norm(out.amp.reshape(-1) - ref) < 1e-9


def test_propagate_conserves_energy_and_norm():
    state = random_state(PARAMS, 4)
    h = build_hamiltonian(PARAMS)
    e0 = np.vdot(state.amp.reshape(-1), h @ state.amp.reshape(-1)).real
    out = propagate(state, 1.0, PARAMS, method="krylov")
    e1 = np.vdot(out.amp.reshape(-1), h @ out.amp.reshape(-1)).real
    assert abs(out.norm() - 1.0) < 1e-10
    assert abs(e1 - e0) < 1e-9 * max(1.0, abs(e0))


def test_propagate_rejects_backwards_runs():
    state = random_state(PARAMS, 5)
    state.time = 1.0
    with pytest.raises(NumericalError):
        propagate(state, 0.5, PARAMS)


def test_dense_refuses_large_dimension():
    big = ModelParams(grid_points=16, n_fermions=2, cutoff=2.0, fock_n_max=2)
    basis = get_basis(big)
    assert basis.dim > 2000
    state = ManyBodyState(
        np.zeros((basis.n_fermi, basis.n_bose), dtype=complex), big
    )
    state.amp[0, 0] = 1.0
    with pytest.raises(ConfigError):
        propagate(state, 0.1, big, method="dense")


def test_unknown_method_rejected():
    state = random_state(PARAMS, 6)
    with pytest.raises(ValueError):
        propagate(state, 0.1, PARAMS, method="cheby")
