"""Measurements on evolved states and their star-picture (extended bath) images.

Chain mode ``n`` lives on MPS site ``n + 1``; site 0 is the two-level system.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .chainmap import StarGrid
from .tensornet.mps import MpsState
from .tensornet.operators import SIGMA_X, SIGMA_Y, SIGMA_Z, annihilation, creation, number, top_projector


@dataclass(frozen=True)
class CorrelationSet:
    """Chain two-point functions ``<c_n^dag c_m>``, ``<c_n^dag c_m^dag>`` and ``<c_n^dag>``."""

    normal: np.ndarray
    anomalous: np.ndarray
    singles: np.ndarray
    time: float = 0.0

    @property
    def n_modes(self) -> int:
        return self.normal.shape[0]

    def check(self, tol: float = 1e-8) -> None:
        """Raise if the structural invariants are violated beyond ``tol``."""
        if np.max(np.abs(self.normal - self.normal.conj().T), initial=0.0) > tol:
            raise ValueError("normal correlation matrix is not Hermitian")
        if np.max(np.abs(self.anomalous - self.anomalous.T), initial=0.0) > tol:
            raise ValueError("anomalous correlation matrix is not symmetric")
        if np.min(np.diag(self.normal).real, initial=0.0) < -1e-10:
            raise ValueError("negative mode occupation")


@dataclass(frozen=True)
class ExtendedSpectrum:
    """Star-mode occupations and pair correlations on the signed frequency grid.

    ``corr`` is the connected pair function ``C(w, w')``; ``pairs`` keeps the
    raw ``<b_w^dag b_w'^dag>`` needed by the thermofield back-map.
    """

    grid: StarGrid
    occupations: np.ndarray
    density: np.ndarray
    corr: np.ndarray
    pairs: np.ndarray
    time: float = 0.0

    @property
    def frequencies(self) -> np.ndarray:
        return self.grid.frequencies


def measure_local(state: MpsState, site: int, operator: np.ndarray) -> complex:
    return state.expect_local(site, operator)


def measure_two_point(state: MpsState, site_a: int, op_a: np.ndarray, site_b: int, op_b: np.ndarray) -> complex:
    return state.expect_two_point(site_a, op_a, site_b, op_b)


def measure_spin(state: MpsState) -> tuple[float, float, float, np.ndarray]:
    """``(<sz>, <sx>, <sy>, rho_s)`` with ``rho_s`` in the (excited, ground) basis."""
    work = state if state.center == 0 else state.copy()
    work.move_center(0)
    a = work.tensors[0]
    rho = np.einsum("asb,atb->st", a, a.conj())
    rho = 0.5 * (rho + rho.conj().T)
    # <O> = tr(rho O) with rho[s, t] = <s|rho|t>
    sz, sx, sy = (float(np.trace(rho @ op).real) for op in (SIGMA_Z, SIGMA_X, SIGMA_Y))
    return sz, sx, sy, rho


def _center_sweep(state: MpsState):
    """Yield ``(site, center_tensor, work_copy)`` with the center moved to each of sites 1..N."""
    work = state.copy()
    for site in range(1, work.n_sites):
        work.move_center(site)
        yield site, work.tensors[site], work


def measure_chain_occupations(state: MpsState) -> np.ndarray:
    out = np.empty(state.n_sites - 1)
    for site, a, _ in _center_sweep(state):
        n = number(a.shape[1])
        out[site - 1] = np.einsum("asb,st,atb->", a.conj(), n, a).real
    return out


def top_fock_populations(state: MpsState) -> np.ndarray:
    """Population of the highest kept Fock level on every chain site (truncation diagnostic)."""
    out = np.empty(state.n_sites - 1)
    for site, a, _ in _center_sweep(state):
        out[site - 1] = np.einsum("asb,st,atb->", a.conj(), top_projector(a.shape[1]), a).real
    return out


def measure_correlation_set(state: MpsState) -> CorrelationSet:
    """All chain two-point functions in ``O(N^2)`` transfer steps.

    With the center on site ``n`` the left block contracts to the identity, so
    an open string starts at ``n`` with ``c_n^dag`` and is carried to the right
    with plain transfer matrices; at every ``m > n`` it is closed with ``c_m``
    or ``c_m^dag`` against the right-canonical remainder.
    """
    n_modes = state.n_sites - 1
    normal = np.zeros((n_modes, n_modes), dtype=complex)
    anomalous = np.zeros((n_modes, n_modes), dtype=complex)
    singles = np.zeros(n_modes, dtype=complex)
    for site, a, work in _center_sweep(state):
        i = site - 1
        d = a.shape[1]
        c, cd = annihilation(d), creation(d)
        normal[i, i] = np.einsum("asb,st,atb->", a.conj(), cd @ c, a)
        anomalous[i, i] = np.einsum("asb,st,atb->", a.conj(), cd @ cd, a)
        singles[i] = np.einsum("asb,st,atb->", a.conj(), cd, a)
        # env[b, b'] = sum conj(A)[a, s, b'] cd[s, t] A[a, t, b]
        env = np.einsum("asc,st,atb->bc", a.conj(), cd, a)
        for m in range(site + 1, work.n_sites):
            b = work.tensors[m]
            dm = b.shape[1]
            x = np.tensordot(env, b, ([0], [0]))  # (b', t, r)
            bc = b.conj()
            normal[i, m - 1] = np.einsum("ctr,st,csr->", x, annihilation(dm), bc)
            anomalous[i, m - 1] = np.einsum("ctr,st,csr->", x, creation(dm), bc)
            env = np.tensordot(x, bc, ([0, 1], [0, 1]))  # (r, r')
    iu = np.triu_indices(n_modes, 1)
    normal[iu[::-1]] = normal[iu].conj()
    anomalous[iu[::-1]] = anomalous[iu]
    return CorrelationSet(normal, anomalous, singles, state.time)


def extended_spectrum(corr: CorrelationSet, grid: StarGrid) -> ExtendedSpectrum:
    """Map chain correlations onto the (zero-padded) star grid.

    ``C(w, w') = <b_w^dag b_w'^dag> - <b_w^dag><b_w'^dag>``; occupations are
    divided by the cell widths to give densities.
    """
    if grid.m_pad < corr.n_modes:
        raise ValueError(f"star grid has {grid.m_pad} modes, correlation set {corr.n_modes}")
    star_normal_diag = np.einsum("ni,nm,mi->i", grid.transform[: corr.n_modes], corr.normal,
                                 grid.transform[: corr.n_modes]).real
    singles = grid.vector_to_star(corr.singles)
    pairs = grid.to_star(corr.anomalous)
    connected = pairs - np.outer(singles, singles)
    return ExtendedSpectrum(grid, star_normal_diag, star_normal_diag / grid.widths, connected, pairs, corr.time)


def bond_dimension_trace(history) -> np.ndarray:
    """``chi[bond, step]`` from a sequence of per-step bond-dimension lists."""
    arr = np.asarray(list(history), dtype=int)
    if arr.ndim != 2:
        raise ValueError("history must be a sequence of equal-length bond-dimension lists")
    return arr.T
