import numpy as np
import pytest

from ttedopa.chainmap import ChainCoefficients, build_star_grid, compute_chain_coefficients
from ttedopa.observables import (
    CorrelationSet,
    bond_dimension_trace,
    extended_spectrum,
    measure_chain_occupations,
    measure_correlation_set,
    measure_local,
    measure_spin,
    measure_two_point,
    top_fock_populations,
)
from ttedopa.oracle import DenseInstance, dense_evolve
from ttedopa.spectral import SpectralModel, SystemModel, ThermalizedSpectralModel
from ttedopa.tensornet import EvolutionConfig, TdvpIntegrator, build_chain_mpo, init_state, product_state
from ttedopa.tensornet.operators import SIGMA_X, SIGMA_Y, SIGMA_Z, annihilation, creation, number
from ttedopa.validation import random_chain


@pytest.fixture(scope="module")
def evolved():
    """An N=3 evolved state next to its dense reference."""
    rng = np.random.default_rng(7)
    coeffs = random_chain(rng, 3)
    system = SystemModel(0.2, ("bloch", 1.0, 0.4))
    d = 3
    state = init_state(system, 3, d)
    integ = TdvpIntegrator(build_chain_mpo(coeffs, system, d), EvolutionConfig(dt=0.01, chi_max=50, precision_p=1e-10, d=d))
    for _ in range(300):
        integ.step(state)
    ref = dense_evolve(DenseInstance.from_chain(coeffs, system, d), state.time)
    return state, ref, d


def test_spin_of_initial_states():
    sz, sx, sy, rho = measure_spin(init_state(SystemModel(0.2, "excited"), 3, 3))
    assert (sz, sx, sy) == pytest.approx((1.0, 0.0, 0.0))
    np.testing.assert_allclose(rho, [[1, 0], [0, 0]])
    _, sx, _, _ = measure_spin(init_state(SystemModel(0.2, "plus"), 3, 3))
    assert sx == pytest.approx(1.0)


def test_spin_matches_oracle(evolved):
    state, ref, _ = evolved
    sz, sx, sy, rho = measure_spin(state)
    for val, op in ((sz, SIGMA_Z), (sx, SIGMA_X), (sy, SIGMA_Y)):
        assert val == pytest.approx(ref.expect(ref.local_operator(0, op)).real, abs=1e-6)
    assert np.trace(rho).real == pytest.approx(1.0, abs=1e-10)
    np.testing.assert_allclose(rho, rho.conj().T, atol=1e-14)
    assert np.linalg.eigvalsh(rho).min() >= -1e-10


def test_correlation_set_matches_oracle(evolved):
    state, ref, d = evolved
    cs = measure_correlation_set(state)
    c, cd = annihilation(d), creation(d)
    for n in range(3):
        assert cs.singles[n] == pytest.approx(ref.expect(ref.local_operator(n + 1, cd)), abs=1e-6)
        for m in range(3):
            op_n = ref.local_operator(n + 1, cd)
            assert cs.normal[n, m] == pytest.approx(ref.expect(op_n @ ref.local_operator(m + 1, c)), abs=1e-6)
            assert cs.anomalous[n, m] == pytest.approx(ref.expect(op_n @ ref.local_operator(m + 1, cd)), abs=1e-6)
    cs.check()


def test_occupations_agree_with_normal_diagonal(evolved):
    state, _, d = evolved
    occ = measure_chain_occupations(state)
    cs = measure_correlation_set(state)
    np.testing.assert_allclose(occ, np.diag(cs.normal).real, atol=1e-10)
    np.testing.assert_allclose(occ, [measure_local(state, k, number(d)).real for k in range(1, 4)], atol=1e-12)
    assert measure_two_point(state, 1, creation(d), 2, annihilation(d)) == pytest.approx(cs.normal[0, 1], abs=1e-10)


def test_vacuum_measurements_vanish():
    state = init_state(SystemModel(0.2), 5, 4)
    cs = measure_correlation_set(state)
    assert not np.any(cs.normal) and not np.any(cs.anomalous) and not np.any(cs.singles)
    assert not np.any(measure_chain_occupations(state))
    assert not np.any(top_fock_populations(state))
    co = compute_chain_coefficients(ThermalizedSpectralModel(SpectralModel(2.0, 0.25), 2.0), 5)
    spec = extended_spectrum(cs, build_star_grid(co, 30))
    assert not np.any(spec.occupations) and not np.any(spec.corr) and not np.any(spec.density)


def test_bare_chain_normal_trace_constant():
    rng = np.random.default_rng(3)
    n, d = 6, 3
    coeffs = ChainCoefficients(rng.uniform(0, 1, n), rng.uniform(0.1, 0.5, n - 1), 0.0)
    state = product_state([[0, 1]] + [np.eye(d)[1 if k == 0 else 0] for k in range(n)])
    integ = TdvpIntegrator(build_chain_mpo(coeffs, SystemModel(0.2), d), EvolutionConfig(dt=0.1, chi_max=8, d=d))
    for _ in range(5):
        for _ in range(10):
            integ.step(state)
        assert np.trace(measure_correlation_set(state).normal).real == pytest.approx(1.0, abs=1e-8)


def test_extended_spectrum_trace_and_connected_part(evolved):
    state, _, _ = evolved
    cs = measure_correlation_set(state)
    co = compute_chain_coefficients(ThermalizedSpectralModel(SpectralModel(2.0, 0.25), 2.0), 3)
    grid = build_star_grid(co, 50)
    spec = extended_spectrum(cs, grid)
    assert spec.occupations.sum() == pytest.approx(np.trace(cs.normal).real, abs=1e-8)
    np.testing.assert_allclose(spec.density * grid.widths, spec.occupations, atol=1e-15)
    u = grid.transform[:3]
    singles = u.T @ cs.singles
    np.testing.assert_allclose(spec.pairs, u.T @ cs.anomalous @ u, atol=1e-14)
    np.testing.assert_allclose(spec.corr, spec.pairs - np.outer(singles, singles), atol=1e-14)
    np.testing.assert_allclose(spec.corr, spec.corr.T, atol=1e-14)
    assert spec.time == state.time


def test_extended_spectrum_needs_large_enough_grid():
    cs = CorrelationSet(np.zeros((4, 4)), np.zeros((4, 4)), np.zeros(4))
    co = compute_chain_coefficients(ThermalizedSpectralModel(SpectralModel(2.0, 0.25), 2.0), 3)
    with pytest.raises(ValueError):
        extended_spectrum(cs, build_star_grid(co, 3))


def test_correlation_set_check_flags_bad_input():
    bad = CorrelationSet(np.array([[0, 1], [0, 0]]), np.zeros((2, 2)), np.zeros(2))
    with pytest.raises(ValueError):
        bad.check()
    with pytest.raises(ValueError):
        CorrelationSet(np.diag([-1.0, 0.0]), np.zeros((2, 2)), np.zeros(2)).check()


def test_bond_dimension_trace():
    history = [[1, 1, 1], [1, 2, 2], [2, 3, 2]]
    chi = bond_dimension_trace(history)
    assert chi.shape == (3, 3)
    np.testing.assert_array_equal(chi[:, -1], [2, 3, 2])
    with pytest.raises(ValueError):
        bond_dimension_trace([1, 2, 3])


def test_product_state_stays_product_without_hamiltonian():
    coeffs = ChainCoefficients(np.zeros(3), np.zeros(2), 0.0)
    state = init_state(SystemModel(0.0), 3, 3)
    integ = TdvpIntegrator(build_chain_mpo(coeffs, SystemModel(0.0), 3), EvolutionConfig(dt=0.1, d=3))
    hist = []
    for _ in range(20):
        integ.step(state)
        hist.append(state.bond_dims)
    assert np.all(bond_dimension_trace(hist) == 1)
