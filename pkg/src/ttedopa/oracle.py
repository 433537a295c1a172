"""Brute-force references: dense state-vector dynamics and adaptive quadrature.

Nothing here shares code with the tensor-network or chain-mapping paths. The
Hamiltonian is assembled from Kronecker products, and the moment quadrature
uses its own Gauss-Legendre panels with bisection refinement.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import expm_multiply

from .chainmap import ChainCoefficients, PrecisionError
from .spectral import SystemModel, ThermalizedSpectralModel

MAX_SITES = 5
MAX_D = 6
MAX_DIM = 2 * MAX_D**MAX_SITES
_EIGH_DIM = 2048


def _boson_ops(d):
    a = np.diag(np.sqrt(np.arange(1.0, d)), 1)
    return a, a.T.copy(), np.diag(np.arange(float(d)))


def _embed(ops_by_slot, dims):
    """Kronecker product with identities in the unspecified slots."""
    out = sp.identity(1, format="csr", dtype=complex)
    for k, dk in enumerate(dims):
        op = ops_by_slot.get(k)
        block = sp.identity(dk, format="csr", dtype=complex) if op is None else sp.csr_matrix(op, dtype=complex)
        out = sp.kron(out, block, format="csr")
    return out


def dense_hamiltonian(coeffs: ChainCoefficients, system: SystemModel, d: int, sparse: bool = False):
    """TLS + chain Hamiltonian on ``C^2 (x) (C^d)^N``, TLS as the most significant factor."""
    n = coeffs.n_sites
    if n > MAX_SITES or d > MAX_D:
        raise ValueError(f"dense instances are limited to N <= {MAX_SITES}, d <= {MAX_D}")
    dims = [2] + [d] * n
    a, adag, num = _boson_ops(d)
    sz = np.diag([1.0, -1.0])
    sx = np.array([[0.0, 1.0], [1.0, 0.0]])
    h = 0.5 * system.epsilon * _embed({0: sz}, dims)
    h = h + 0.5 * coeffs.g0 * _embed({0: sx, 1: a + adag}, dims)
    for k in range(n):
        h = h + coeffs.omegas[k] * _embed({k + 1: num}, dims)
    for k in range(n - 1):
        hop = _embed({k + 2: adag, k + 1: a}, dims)
        h = h + coeffs.couplings[k] * (hop + hop.conj().T)
    return h.tocsr() if sparse else h.toarray()


@dataclass
class DenseInstance:
    """Small TLS + chain problem held as a dense Hamiltonian and state vector."""

    hamiltonian: np.ndarray
    state: np.ndarray
    n_sites: int
    d: int
    time: float = 0.0
    _eig: tuple | None = field(default=None, repr=False)

    def __post_init__(self):
        dim = 2 * self.d**self.n_sites
        if dim > MAX_DIM:
            raise ValueError(f"dimension {dim} exceeds the dense cap {MAX_DIM}")
        if self.hamiltonian.shape != (dim, dim) or self.state.shape != (dim,):
            raise ValueError("hamiltonian/state shapes do not match 2*d**N")

    @classmethod
    def from_chain(cls, coeffs: ChainCoefficients, system: SystemModel, d: int) -> "DenseInstance":
        vac = np.zeros(d**coeffs.n_sites, dtype=complex)
        vac[0] = 1.0
        psi = np.kron(system.state_vector(), vac)
        return cls(dense_hamiltonian(coeffs, system, d), psi, coeffs.n_sites, d)

    @property
    def dim(self) -> int:
        return self.state.shape[0]

    def local_operator(self, site: int, op: np.ndarray) -> np.ndarray:
        """Embed ``op`` acting on MPS-ordered ``site`` (0 = TLS)."""
        dims = [2] + [self.d] * self.n_sites
        return _embed({site: op}, dims).toarray()

    def expect(self, op: np.ndarray) -> complex:
        return complex(np.vdot(self.state, op @ self.state))


def dense_evolve(instance: DenseInstance, t: float) -> DenseInstance:
    """Propagate by ``exp(-i H t)``; returns a new instance at ``instance.time + t``."""
    h = instance.hamiltonian
    if instance.dim <= _EIGH_DIM:
        if instance._eig is None:
            instance._eig = np.linalg.eigh(h)
        vals, vecs = instance._eig
        psi = vecs @ (np.exp(-1j * vals * t) * (vecs.conj().T @ instance.state))
    else:
        psi = expm_multiply(-1j * t * sp.csr_matrix(h), instance.state)
    return DenseInstance(h, psi, instance.n_sites, instance.d, instance.time + t, instance._eig)


# --- quadrature -----------------------------------------------------------------

_GL_X, _GL_W = np.polynomial.legendre.leggauss(20)


def _panel(f, a, b):
    mid, half = 0.5 * (a + b), 0.5 * (b - a)
    return half * float(np.dot(_GL_W, f(mid + half * _GL_X)))


def _integrate(f, a, b, rtol, depth=0, whole=None):
    whole = _panel(f, a, b) if whole is None else whole
    m = 0.5 * (a + b)
    left, right = _panel(f, a, m), _panel(f, m, b)
    if abs(left + right - whole) <= rtol * abs(left + right) + 1e-300:
        return left + right
    if depth > 60:
        raise PrecisionError("adaptive quadrature did not converge")
    return _integrate(f, a, m, rtol, depth + 1, left) + _integrate(f, m, b, rtol, depth + 1, right)


def quadrature_moment(model: ThermalizedSpectralModel, j: int, n_panels: int = 8, rtol: float = 1e-12) -> float:
    """``int w**j J_beta(w) dw`` by recursive bisection of ``n_panels`` initial panels.

    The origin is always a panel edge so the kink (or integrable singularity
    for ``s < 1``) of ``J_beta`` is never inside a panel; the two panels that
    touch it are integrated in ``u`` with ``w = edge * u**2``, which turns the
    ``w**(-1/2)`` singularity into a smooth integrand.
    """
    if j < 0:
        raise ValueError("moment order must be >= 0")
    lo, hi = model.support

    def f(w):
        return w**j * model(w)

    total = 0.0
    for a, b in ((lo, 0.0), (0.0, hi)):
        if b <= a:
            continue
        edges = np.linspace(a, b, n_panels + 1)
        inner = edges[1] if a == 0.0 else edges[-2]

        def g(u, inner=inner):
            return f(inner * u**2) * 2.0 * abs(inner) * u

        panels = list(zip(edges[:-1], edges[1:]))
        panels = panels[1:] if a == 0.0 else panels[:-1]
        parts = [_integrate(g, 0.0, 1.0, rtol)] + [_integrate(f, x0, x1, rtol) for x0, x1 in panels]
        total += math.fsum(parts)
    return total


def stieltjes_coefficients(model: ThermalizedSpectralModel, n: int, n_nodes: int = 4000):
    """Recurrence coefficients by the discretized Stieltjes procedure.

    Independent of the Lanczos route: polynomials are propagated by their
    three-term recurrence on a Gauss-Legendre rule whose nodes are clustered
    at both ends of each half-support by a smoothstep change of variables.
    """
    lo, hi = model.support
    x, w = np.polynomial.legendre.leggauss(n_nodes // 2)
    nodes, weights = [], []
    for a, b in ((lo, 0.0), (0.0, hi)):
        if b <= a:
            continue
        # cubic stretching clusters nodes at both ends of each half-interval
        u = 0.5 * (x + 1.0)
        t = u * u * (3.0 - 2.0 * u)
        dt = 6.0 * u * (1.0 - u) * 0.5
        nodes.append(a + (b - a) * t)
        weights.append((b - a) * dt * w)
    nodes = np.concatenate(nodes)
    weights = np.concatenate(weights) * model(nodes)
    alpha = np.zeros(n)
    beta = np.zeros(n)
    mu0 = weights.sum()
    p_prev = np.zeros_like(nodes)
    p = np.ones_like(nodes)
    norm_prev = mu0
    beta[0] = mu0
    for k in range(n):
        norm = np.dot(weights, p * p)
        alpha[k] = np.dot(weights, nodes * p * p) / norm
        if k > 0:
            beta[k] = norm / norm_prev
        p_next = (nodes - alpha[k]) * p - (beta[k] if k > 0 else 0.0) * p_prev
        # rescale to avoid overflow; ratios are unaffected
        scale = math.sqrt(norm)
        p_prev, p, norm_prev = p / scale, p_next / scale, norm / scale**2
    return alpha, np.sqrt(beta[1:]), math.sqrt(mu0)
