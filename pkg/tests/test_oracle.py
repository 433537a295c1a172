import math

import numpy as np
import pytest
from scipy.integrate import quad

from ttedopa.chainmap import ChainCoefficients
from ttedopa.oracle import DenseInstance, dense_evolve, dense_hamiltonian, quadrature_moment
from ttedopa.spectral import SpectralModel, SystemModel, ThermalizedSpectralModel, evaluate_sdf
from ttedopa.tensornet.operators import SIGMA_X, SIGMA_Z
from ttedopa.validation import random_chain


def single_mode(omega0, g0):
    return ChainCoefficients(np.array([omega0]), np.array([]), g0)


def test_free_precession():
    eps = 0.3
    inst = DenseInstance.from_chain(single_mode(0.0, 0.0), SystemModel(eps, "plus"), 3)
    sx = inst.local_operator(0, SIGMA_X)
    for t in (0.0, 1.0, 7.5, 20.0):
        assert dense_evolve(inst, t).expect(sx).real == pytest.approx(math.cos(eps * t), abs=1e-12)


def test_resonant_exchange_period():
    """Weak resonant coupling swaps |e,0> and |g,1> with period 2 pi / g0."""
    eps, g0 = 0.2, 0.01
    inst = DenseInstance.from_chain(single_mode(eps, g0), SystemModel(eps, "excited"), 4)
    sz = inst.local_operator(0, SIGMA_Z)
    half = math.pi / g0
    assert dense_evolve(inst, half).expect(sz).real < -0.99
    assert dense_evolve(inst, 2 * half).expect(sz).real > 0.99


def test_resonant_exchange_against_direct_two_level_solution():
    """In the one-excitation block with weak coupling, sz(t) = cos(g0 t) up to O(g0/eps)."""
    eps, g0 = 0.2, 0.002
    inst = DenseInstance.from_chain(single_mode(eps, g0), SystemModel(eps, "excited"), 3)
    sz = inst.local_operator(0, SIGMA_Z)
    t = np.linspace(0, 2 * math.pi / g0, 9)
    got = [dense_evolve(inst, ti).expect(sz).real for ti in t]
    np.testing.assert_allclose(got, np.cos(g0 * t), atol=5e-3)


def test_unitarity_and_energy(rng):
    coeffs = random_chain(rng, 3)
    inst = DenseInstance.from_chain(coeffs, SystemModel(0.2, "plus"), 4)
    e0 = inst.expect(inst.hamiltonian).real
    for t in (0.5, 5.0, 50.0):
        out = dense_evolve(inst, t)
        assert np.linalg.norm(out.state) == pytest.approx(1.0, abs=1e-10)
        assert out.expect(out.hamiltonian).real == pytest.approx(e0, abs=1e-10)
        assert out.time == t


def test_sparse_path_matches_eigh(rng):
    coeffs = random_chain(rng, 5)
    inst = DenseInstance.from_chain(coeffs, SystemModel(0.2), 5)
    assert inst.dim > 2048  # exercises the Krylov branch
    out = dense_evolve(inst, 1.0)
    assert np.linalg.norm(out.state) == pytest.approx(1.0, abs=1e-10)
    small = DenseInstance.from_chain(coeffs.truncated(3), SystemModel(0.2), 5)
    assert small.dim <= 2048


def test_hamiltonian_is_hermitian(rng):
    h = dense_hamiltonian(random_chain(rng, 4), SystemModel(0.3), 3)
    assert np.max(np.abs(h - h.conj().T)) <= 1e-12


def test_single_site_hamiltonian_by_hand():
    eps, g0, w0, d = 0.2, 0.3, 0.7, 2
    h = dense_hamiltonian(single_mode(w0, g0), SystemModel(eps), d)
    a = np.array([[0, 1], [0, 0]])
    expected = (
        0.5 * eps * np.kron(np.diag([1, -1]), np.eye(2))
        + 0.5 * g0 * np.kron(SIGMA_X.real, a + a.T)
        + w0 * np.kron(np.eye(2), a.T @ a)
    )
    np.testing.assert_allclose(h, expected, atol=1e-15)


def test_size_caps():
    with pytest.raises(ValueError):
        dense_hamiltonian(ChainCoefficients(np.zeros(6), np.ones(5), 1.0), SystemModel(0.2), 2)
    with pytest.raises(ValueError):
        dense_hamiltonian(single_mode(0.1, 0.1), SystemModel(0.2), 7)


def test_moment_closed_form_cold_ohmic():
    m = ThermalizedSpectralModel(SpectralModel(1.0, 0.05), math.inf)
    assert quadrature_moment(m, 0) == pytest.approx(0.05, rel=1e-13)
    assert quadrature_moment(m, 1) == pytest.approx(2 * 0.05 / 3, rel=1e-13)


def test_first_moment_small_at_high_temperature():
    m = ThermalizedSpectralModel(SpectralModel(1.0, 0.05), 0.01)
    assert abs(quadrature_moment(m, 1)) <= 0.01 * quadrature_moment(m, 0)


@pytest.mark.parametrize("s", [0.5, 1.0, 3.0])
def test_zeroth_moment_is_coth_integral(s):
    base = SpectralModel(s, 0.1)
    beta = 3.0
    m = ThermalizedSpectralModel(base, beta)
    ref = quad(lambda w: evaluate_sdf(base, w) / math.tanh(beta * w / 2), 0, 1, epsabs=0, epsrel=1e-13, limit=200)[0]
    assert quadrature_moment(m, 0) == pytest.approx(ref, rel=1e-10)


@pytest.mark.parametrize(("s", "beta"), [(0.5, 2.0), (2.0, 0.5), (3.0, 2000.0)])
def test_moment_panel_refinement(s, beta):
    m = ThermalizedSpectralModel(SpectralModel(s, 0.1), beta)
    for j in (0, 1, 4):
        coarse, fine = quadrature_moment(m, j, n_panels=8), quadrature_moment(m, j, n_panels=16)
        assert fine == pytest.approx(coarse, rel=1e-10, abs=1e-14)


def test_negative_order_rejected():
    with pytest.raises(ValueError):
        quadrature_moment(ThermalizedSpectralModel(SpectralModel(1.0, 0.1), 1.0), -1)
