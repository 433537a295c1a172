"""Chain mapping of the extended bath: recurrence coefficients of the measure
``J_beta(w) dw`` and the orthogonal star <-> chain transform.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import eigh_tridiagonal

from ._quad import composite_rule, graded_edges
from .spectral import ThermalizedSpectralModel, evaluate_thermalized_sdf

PANEL_ORDER = 16


class PrecisionError(RuntimeError):
    """Lanczos basis lost orthogonality; a finer discretization is needed."""


@dataclass(frozen=True)
class ChainCoefficients:
    """Nearest-neighbour chain: on-site ``omegas[k]``, hoppings ``couplings[k-1] = g_k``
    between sites ``k-1`` and ``k``, and the system coupling ``g0``.
    """

    omegas: np.ndarray
    couplings: np.ndarray
    g0: float
    source: ThermalizedSpectralModel | None = field(default=None, compare=False)
    n_quad: int = 0

    def __post_init__(self):
        if len(self.couplings) != max(len(self.omegas) - 1, 0):
            raise ValueError("need len(couplings) == len(omegas) - 1")

    @property
    def n_sites(self) -> int:
        return len(self.omegas)

    def jacobi_matrix(self) -> np.ndarray:
        return np.diag(self.omegas) + np.diag(self.couplings, 1) + np.diag(self.couplings, -1)

    def truncated(self, n_sites: int) -> "ChainCoefficients":
        return ChainCoefficients(self.omegas[:n_sites], self.couplings[: n_sites - 1], self.g0, self.source, self.n_quad)

    def with_g0(self, g0: float) -> "ChainCoefficients":
        return ChainCoefficients(self.omegas, self.couplings, g0, self.source, self.n_quad)


def discretize_measure(model: ThermalizedSpectralModel, n_quad: int, order: int = PANEL_ORDER):
    """Composite Gauss-Legendre discretization of ``J_beta(w) dw``.

    ``n_quad`` sets the node count of the uniform panels; a geometric cluster
    of panels is added around ``w = 0`` (scale ``10/beta`` at finite temperature).
    Returns nodes and the measure weights ``J_beta(node) * gl_weight``.
    """
    lo, hi = model.support
    wc = model.omega_c
    grade = wc if math.isinf(model.beta) else min(wc, 10.0 / model.beta)
    n_uniform = max(int(math.ceil(n_quad / order)), 4)
    edges = graded_edges(lo, hi, n_uniform, grade_scale=grade, ratio=0.2)
    x, w = composite_rule(edges, order)
    mass = evaluate_thermalized_sdf(model, x) * w
    keep = mass > 0
    return x[keep], mass[keep]


def lanczos_recurrence(nodes: np.ndarray, weights: np.ndarray, n: int, orth_tol: float = 1e-8):
    """Recurrence coefficients of the discrete measure ``sum_i weights[i] delta(x - nodes[i])``.

    Lanczos on ``diag(nodes)`` started from ``sqrt(weights)``, with two passes of
    full reorthogonalization per step. Returns ``(diag, offdiag, mu0)`` where
    ``diag`` has length ``n`` and ``offdiag`` length ``n - 1``.
    """
    mu0 = float(np.sum(weights))
    if not mu0 > 0:
        raise ValueError("measure has zero total mass")
    if n > len(nodes):
        raise PrecisionError(f"discrete measure has {len(nodes)} points, cannot produce {n} coefficients")
    q = np.zeros((len(nodes), n))
    q[:, 0] = np.sqrt(weights / mu0)
    diag = np.zeros(n)
    off = np.zeros(max(n - 1, 0))
    scale = float(np.max(np.abs(nodes)))
    for k in range(n):
        v = nodes * q[:, k]
        diag[k] = q[:, k] @ v
        if k == n - 1:
            break
        v -= diag[k] * q[:, k]
        if k > 0:
            v -= off[k - 1] * q[:, k - 1]
        basis = q[:, : k + 1]
        for _ in range(2):
            v -= basis @ (basis.T @ v)
        b = float(np.linalg.norm(v))
        if b <= 1e-13 * scale:
            raise PrecisionError(f"Lanczos breakdown at step {k}; increase n_quad")
        off[k] = b
        q[:, k + 1] = v / b
    overlap = q.T @ q
    np.fill_diagonal(overlap, overlap.diagonal() - 1.0)
    err = float(np.max(np.abs(overlap)))
    if err > orth_tol:
        raise PrecisionError(f"Lanczos orthogonality lost ({err:.2e}); increase n_quad")
    return diag, off, mu0


def default_n_quad(n_sites: int) -> int:
    return max(10 * n_sites, 4000)


def compute_chain_coefficients(
    model: ThermalizedSpectralModel, n_sites: int, n_quad: int | None = None
) -> ChainCoefficients:
    """Chain frequencies and hoppings of the extended bath, ``g0 = sqrt(mu0)``."""
    if n_sites < 1:
        raise ValueError("n_sites must be >= 1")
    n_quad = default_n_quad(n_sites) if n_quad is None else n_quad
    if n_quad < 10 * n_sites:
        raise ValueError("n_quad must be at least 10 * n_sites")
    x, w = discretize_measure(model, n_quad)
    diag, off, mu0 = lanczos_recurrence(x, w, n_sites)
    return ChainCoefficients(diag, off, math.sqrt(mu0), model, n_quad)


def gauss_rule(coeffs: ChainCoefficients) -> tuple[np.ndarray, np.ndarray]:
    """Gauss nodes/weights of the measure from its first ``n_sites`` recurrence coefficients."""
    nodes, vecs = eigh_tridiagonal(coeffs.omegas, coeffs.couplings)
    return nodes, coeffs.g0**2 * vecs[0] ** 2


@dataclass(frozen=True)
class StarGrid:
    """Star (normal-mode) frequencies of an ``M``-site chain.

    ``transform[n, i]`` is the amplitude of star mode ``i`` in chain mode ``n``,
    i.e. ``c_n = sum_i transform[n, i] b_i``. Columns are signed so that
    ``transform[0, i] > 0`` (every star mode couples to the system with a
    positive amplitude). ``widths`` are the frequency cells used to turn mode
    occupations into densities.
    """

    frequencies: np.ndarray
    transform: np.ndarray
    widths: np.ndarray

    @property
    def m_pad(self) -> int:
        return len(self.frequencies)

    def to_star(self, chain_matrix: np.ndarray) -> np.ndarray:
        """``U^T A U`` for a chain-basis matrix ``A`` padded with zeros to ``m_pad``."""
        a = np.asarray(chain_matrix)
        n = a.shape[0]
        if a.ndim != 2 or a.shape[1] != n or n > self.m_pad:
            raise ValueError(f"chain matrix of shape {a.shape} does not fit a star grid of {self.m_pad} modes")
        u = self.transform[:n]
        return u.T @ a @ u

    def vector_to_star(self, chain_vector: np.ndarray) -> np.ndarray:
        v = np.asarray(chain_vector)
        if v.ndim != 1 or v.shape[0] > self.m_pad:
            raise ValueError("chain vector does not fit the star grid")
        return self.transform[: v.shape[0]].T @ v


def cell_widths(freqs: np.ndarray) -> np.ndarray:
    """Widths of the cells between midpoints of neighbouring frequencies."""
    f = np.asarray(freqs, dtype=float)
    if len(f) == 1:
        return np.ones(1)
    mid = 0.5 * (f[1:] + f[:-1])
    edges = np.concatenate(([f[0] - (mid[0] - f[0])], mid, [f[-1] + (f[-1] - mid[-1])]))
    return np.diff(edges)


def star_grid_from_coefficients(coeffs: ChainCoefficients) -> StarGrid:
    if coeffs.n_sites == 1:
        return StarGrid(np.array(coeffs.omegas, dtype=float), np.ones((1, 1)), np.ones(1))
    vals, vecs = eigh_tridiagonal(coeffs.omegas, coeffs.couplings)
    signs = np.where(vecs[0] < 0, -1.0, 1.0)
    vecs = vecs * signs[None, :]
    if np.any(np.diff(vals) <= 0):
        raise np.linalg.LinAlgError("star frequencies are not strictly increasing")
    return StarGrid(vals, vecs, cell_widths(vals))


def build_star_grid(coeffs: ChainCoefficients, m_pad: int) -> StarGrid:
    """Star grid of the ``m_pad``-site extension of ``coeffs``' chain (same measure)."""
    if m_pad < coeffs.n_sites:
        raise ValueError("m_pad must be >= n_sites")
    if m_pad == coeffs.n_sites or coeffs.source is None:
        if m_pad != coeffs.n_sites:
            raise ValueError("padding needs the source spectral model")
        return star_grid_from_coefficients(coeffs)
    n_quad = max(coeffs.n_quad, 10 * m_pad)
    padded = compute_chain_coefficients(coeffs.source, m_pad, n_quad)
    return star_grid_from_coefficients(padded)


def chain_to_star_occupations(grid: StarGrid, chain_normal: np.ndarray) -> np.ndarray:
    """Star-mode occupations ``diag(U^T <c^dag c> U)``."""
    a = np.asarray(chain_normal)
    n = a.shape[0]
    if a.ndim != 2 or a.shape[1] != n or n > grid.m_pad:
        raise ValueError(f"chain matrix of shape {a.shape} does not fit a star grid of {grid.m_pad} modes")
    u = grid.transform[:n]
    occ = np.einsum("ni,nm,mi->i", u, a, u)
    return occ.real if np.iscomplexobj(occ) else occ
