import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ttedopa.chainmap import (
    ChainCoefficients,
    build_star_grid,
    chain_to_star_occupations,
    compute_chain_coefficients,
    default_n_quad,
    gauss_rule,
)
from ttedopa.oracle import quadrature_moment, stieltjes_coefficients
from ttedopa.spectral import SpectralModel, ThermalizedSpectralModel

MOMENT_CASES = [(s, beta) for s in (0.5, 1.0, 2.0) for beta in (0.5, 2.0, 20.0, 2000.0)]


def thermal(s, beta, alpha=0.1):
    return ThermalizedSpectralModel(SpectralModel(s, alpha), beta)


@pytest.mark.parametrize(("s", "beta"), MOMENT_CASES)
def test_g0_squared_is_zeroth_moment(s, beta):
    m = thermal(s, beta)
    co = compute_chain_coefficients(m, 20)
    assert co.g0**2 == pytest.approx(quadrature_moment(m, 0), rel=1e-8)


@pytest.mark.parametrize("s", [0.5, 1.0, 2.0])
@pytest.mark.parametrize("beta", [0.5, 2.0, 5.0, 20.0])
def test_thermal_asymptotics(s, beta):
    co = compute_chain_coefficients(thermal(s, beta), 51)
    assert abs(co.omegas[50]) <= 0.01
    assert co.couplings[49] == pytest.approx(0.5, rel=0.01)


def test_zero_temperature_asymptotics():
    co = compute_chain_coefficients(thermal(1.0, math.inf), 51)
    assert co.omegas[50] == pytest.approx(0.5, rel=0.01)
    assert co.couplings[49] == pytest.approx(0.25, rel=0.01)


@pytest.mark.parametrize(("s", "beta"), [(0.5, 2.0), (1.0, math.inf), (2.0, 0.5), (3.0, 2000.0)])
def test_matches_stieltjes_oracle(s, beta):
    m = thermal(s, beta)
    co = compute_chain_coefficients(m, 51)
    omegas, couplings, g0 = stieltjes_coefficients(m, 51)
    np.testing.assert_allclose(co.omegas, omegas, atol=1e-9)
    np.testing.assert_allclose(co.couplings, couplings, atol=1e-9)
    assert co.g0 == pytest.approx(g0, rel=1e-9)


@pytest.mark.parametrize(("s", "beta"), [(0.5, 0.5), (1.0, 5.0), (2.0, 2000.0), (3.0, 2.0)])
def test_gauss_rule_reproduces_moments(s, beta):
    m = thermal(s, beta)
    n = 8
    nodes, weights = gauss_rule(compute_chain_coefficients(m, n))
    for j in range(2 * n):
        ref = quadrature_moment(m, j)
        scale = quadrature_moment(m, 0)  # odd moments can nearly vanish at high T
        assert np.dot(weights, nodes**j) == pytest.approx(ref, rel=1e-8, abs=1e-10 * scale)


@settings(max_examples=25, deadline=None)
@given(s=st.sampled_from([0.5, 1.0, 2.0, 3.0]), log_beta=st.floats(-1.0, 3.5), n=st.integers(2, 40))
def test_coefficient_invariants(s, log_beta, n):
    co = compute_chain_coefficients(thermal(s, 10.0**log_beta), n)
    assert np.all(co.couplings > 0)
    assert np.all(np.abs(co.omegas) <= 1.0 + 1e-8)
    assert co.g0 > 0
    assert co.n_sites == n
    assert co.n_quad == default_n_quad(n)


def test_n_quad_lower_bound():
    with pytest.raises(ValueError):
        compute_chain_coefficients(thermal(1.0, 1.0), 20, n_quad=100)


def test_star_grid_single_site():
    co = compute_chain_coefficients(thermal(1.0, 1.0), 1)
    grid = build_star_grid(co, 1)
    np.testing.assert_allclose(grid.frequencies, co.omegas)
    np.testing.assert_array_equal(grid.transform, [[1.0]])


@pytest.mark.parametrize(("s", "beta"), [(2.0, 2.0), (0.5, 2000.0)])
def test_star_grid_structure(s, beta):
    co = compute_chain_coefficients(thermal(s, beta), 60)
    grid = build_star_grid(co, 300)
    u = grid.transform
    assert grid.m_pad == 300
    assert np.max(np.abs(u.T @ u - np.eye(300))) <= 1e-10
    assert np.all(np.diff(grid.frequencies) > 0)
    assert np.all(np.abs(grid.frequencies) <= 1.0 + 1e-8)
    assert np.all(u[0] >= 0)  # cold negative modes underflow to exactly zero
    assert np.all(grid.widths > 0)
    np.testing.assert_allclose(grid.widths.sum(), grid.frequencies[-1] - grid.frequencies[0]
                               + 0.5 * (grid.widths[0] + grid.widths[-1]), rtol=1e-12)


def test_padded_grid_spans_support_at_high_temperature():
    co = compute_chain_coefficients(thermal(2.0, 2.0), 60)
    grid = build_star_grid(co, 700)
    assert grid.frequencies[0] < -0.99
    assert grid.frequencies[-1] > 0.99


def test_star_grid_needs_enough_modes():
    co = compute_chain_coefficients(thermal(1.0, 1.0), 10)
    with pytest.raises(ValueError):
        build_star_grid(co, 5)


def test_star_occupation_examples():
    co = compute_chain_coefficients(thermal(2.0, 2.0), 10)
    grid = build_star_grid(co, 40)
    np.testing.assert_array_equal(chain_to_star_occupations(grid, np.zeros((10, 10))), 0.0)
    single = np.zeros((10, 10))
    single[0, 0] = 1.0
    occ = chain_to_star_occupations(grid, single)
    np.testing.assert_allclose(occ, grid.transform[0] ** 2, atol=1e-15)
    assert occ.sum() == pytest.approx(1.0, abs=1e-12)
    with pytest.raises(ValueError):
        chain_to_star_occupations(grid, np.zeros((41, 41)))


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), n=st.integers(1, 12))
def test_star_transform_preserves_trace(seed, n):
    rng = np.random.default_rng(seed)
    co = compute_chain_coefficients(thermal(1.0, 2.0), 12)
    grid = build_star_grid(co, 30)
    a = rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))
    normal = a @ a.conj().T
    occ = chain_to_star_occupations(grid, normal)
    assert occ.sum() == pytest.approx(np.trace(normal).real, rel=1e-10)
    assert np.all(occ >= -1e-10)


def test_scaled_trace_example():
    co = compute_chain_coefficients(thermal(1.0, 2.0), 6)
    grid = build_star_grid(co, 30)
    normal = np.diag([1.2, 0.5, 2.0, 0.0, 0.0, 0.0])
    assert chain_to_star_occupations(grid, normal).sum() == pytest.approx(3.7, rel=1e-12)


@pytest.mark.parametrize(("s", "beta"), [(1.0, 2.0), (2.0, 0.5), (0.5, 2000.0)])
def test_padding_invariance_of_coarse_spectra(s, beta, rng):
    """Correlations on the first N/2 chain sites give the same smoothed star spectrum for M = N and M = 4N."""
    n = 40
    co = compute_chain_coefficients(thermal(s, beta), n)
    small, large = build_star_grid(co, n), build_star_grid(co, 4 * n)
    a = rng.normal(size=(n // 2, n // 2))
    normal = np.zeros((n, n))
    normal[: n // 2, : n // 2] = a @ a.T / n
    centres = np.linspace(-1, 1, 9)

    def coarse(grid):
        occ = chain_to_star_occupations(grid, normal)
        kernel = np.exp(-0.5 * ((grid.frequencies[None, :] - centres[:, None]) / 0.2) ** 2)
        return kernel @ occ

    np.testing.assert_allclose(coarse(small), coarse(large), atol=1e-6)


def test_coefficients_helpers():
    co = ChainCoefficients(np.array([0.1, 0.2, 0.3]), np.array([0.4, 0.5]), 0.6)
    np.testing.assert_array_equal(co.jacobi_matrix(), [[0.1, 0.4, 0], [0.4, 0.2, 0.5], [0, 0.5, 0.3]])
    short = co.truncated(2)
    assert short.n_sites == 2 and short.g0 == 0.6
    assert co.with_g0(0.0).g0 == 0.0
    with pytest.raises(ValueError):
        ChainCoefficients(np.zeros(3), np.zeros(3), 1.0)
