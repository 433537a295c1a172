"""Inverse thermal Bogoliubov map from extended-bath correlators to physical occupations.

A physical mode ``b_k`` at ``w_k > 0`` and its auxiliary partner are mixed into
the extended-bath modes ``a1`` (at ``+w_k``) and ``a2`` (at ``-w_k``) by a
two-mode squeeze with ``cosh(theta)**2 = 1 + n_k`` and ``sinh(theta)**2 = n_k``.
Undoing it gives

    <b^dag b> = ch sh (<a2 a1> + <a1^dag a2^dag>) + sh^2 (1 + <a2^dag a2>) + ch^2 <a1^dag a1>.

The star grid of the extended chain is not symmetric about zero, so values on
the negative side are interpolated linearly (in per-unit-frequency form) to
``-w_k``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .observables import ExtendedSpectrum
from .spectral import bose_einstein

# beyond this beta*omega the auxiliary mode is frozen: sinh(theta) = 0 exactly
_FROZEN_BETA_OMEGA = 700.0
# negative-side values are not needed where sinh(theta) is below this
_NEGLIGIBLE_SINH = 1e-10


class ExtrapolationError(ValueError):
    """A value outside the sampled frequency range was required."""


@dataclass(frozen=True)
class ThermofieldAngles:
    frequencies: np.ndarray
    thetas: np.ndarray
    cosh: np.ndarray
    sinh: np.ndarray
    beta: float

    @classmethod
    def from_grid(cls, frequencies, beta: float) -> "ThermofieldAngles":
        w = np.asarray(frequencies, dtype=float)
        if np.any(w <= 0):
            raise ValueError("thermofield angles need positive frequencies")
        n = np.where(beta * w > _FROZEN_BETA_OMEGA, 0.0, bose_einstein(w, beta))
        sh = np.sqrt(n)
        ch = np.sqrt(1.0 + n)
        return cls(w, np.arcsinh(sh), ch, sh, beta)


@dataclass(frozen=True)
class PairedCorrelators:
    """Extended-bath correlators paired at ``+w_k`` (``a1``) and ``-w_k`` (``a2``)."""

    frequencies: np.ndarray
    widths: np.ndarray
    n1: np.ndarray  # <a1^dag a1>
    n2: np.ndarray  # <a2^dag a2>
    cross: np.ndarray  # <a1^dag a2^dag>; <a2 a1> is its conjugate
    time: float = 0.0


@dataclass(frozen=True)
class PhysicalSpectrum:
    frequencies: np.ndarray
    occupations: np.ndarray
    baseline: np.ndarray
    widths: np.ndarray
    time: float = 0.0

    @property
    def excess(self) -> np.ndarray:
        return self.occupations - self.baseline

    @property
    def total_excess(self) -> float:
        """Number of physical excitations above the thermal background."""
        return float(np.sum(self.excess))


def _interp(x_nodes, y_nodes, x, reach=(0.0, 0.0)):
    """Linear interpolation that refuses to extrapolate (NaN marks out-of-range points).

    ``reach`` extends the accepted range beyond the first/last node (the
    node's own frequency cell); there the end value is held constant.
    """
    out = np.full(np.shape(x), np.nan, dtype=np.result_type(y_nodes, float))
    if len(x_nodes) == 0:
        return out
    inside = (x >= x_nodes[0] - reach[0]) & (x <= x_nodes[-1] + reach[1])
    if np.iscomplexobj(y_nodes):
        out[inside] = np.interp(x[inside], x_nodes, y_nodes.real) + 1j * np.interp(x[inside], x_nodes, y_nodes.imag)
    else:
        out[inside] = np.interp(x[inside], x_nodes, y_nodes)
    return out


def symmetrize_grid(spectrum: ExtendedSpectrum, beta: float | None = None) -> PairedCorrelators:
    """Pair every positive star mode with the negative side interpolated at ``-w_k``.

    Occupations are interpolated as densities (``n / width``) and pair
    functions as ``P / sqrt(width_i width_j)``, then converted back with the
    positive mode's width. A node's frequency cell counts as sampled: the
    outermost half-cell on the negative side and the gap between the
    innermost negative node and zero are covered by holding the end values.

    If ``beta`` is given, modes whose auxiliary partner is frozen out may lie
    beyond the negative support (their negative-side values are set to zero);
    otherwise that raises :class:`ExtrapolationError`.
    """
    w = spectrum.frequencies
    widths = spectrum.grid.widths
    pos = np.flatnonzero(w > 0)
    neg = np.flatnonzero(w < 0)
    if len(pos) == 0:
        raise ExtrapolationError("extended grid has no positive frequencies")
    wk = w[pos]
    dk = widths[pos]
    # ascending in |w| on the negative side -> reverse order of the ascending grid
    neg_abs = -w[neg][::-1]
    neg_idx = neg[::-1]
    # the innermost negative node is the only one covering the gap down to w = 0
    reach = (neg_abs[0], 0.5 * widths[neg_idx[-1]]) if len(neg) else (0.0, 0.0)

    n1 = spectrum.occupations[pos]
    n2 = _interp(neg_abs, spectrum.occupations[neg_idx] / widths[neg_idx], wk, reach) * dk
    block = spectrum.pairs[np.ix_(neg_idx, pos)] / np.sqrt(np.outer(widths[neg_idx], dk))
    cross = np.full(len(pos), np.nan, dtype=complex)
    for j in range(len(pos)):
        cross[j] = _interp(neg_abs, block[:, j], wk[j : j + 1], reach)[0] * dk[j]

    missing = np.isnan(n2) | np.isnan(cross)
    if np.any(missing):
        if beta is None:
            raise ExtrapolationError(f"|w| = {wk[missing].max():.4g} lies beyond the negative-frequency support")
        sh = ThermofieldAngles.from_grid(wk[missing], beta).sinh
        if np.any(sh >= _NEGLIGIBLE_SINH):
            raise ExtrapolationError(
                f"|w| = {wk[missing][sh >= _NEGLIGIBLE_SINH].min():.4g} lies beyond the negative-frequency support"
            )
        n2 = np.where(missing, 0.0, n2)
        cross = np.where(missing, 0.0, cross)
    return PairedCorrelators(wk, dk, n1, n2, cross, spectrum.time)


def back_map_occupations(paired: PairedCorrelators, angles: ThermofieldAngles) -> PhysicalSpectrum:
    if len(angles.frequencies) != len(paired.frequencies) or not np.allclose(
        angles.frequencies, paired.frequencies, rtol=0, atol=1e-14
    ):
        raise ValueError("thermofield angles and paired correlators live on different grids")
    ch, sh = angles.cosh, angles.sinh
    cross = paired.cross
    occ = ch * sh * 2.0 * cross.real + sh**2 * (1.0 + paired.n2) + ch**2 * paired.n1
    return PhysicalSpectrum(paired.frequencies, occ, sh**2, paired.widths, paired.time)


def physical_spectrum(spectrum: ExtendedSpectrum, beta: float) -> PhysicalSpectrum:
    paired = symmetrize_grid(spectrum, beta)
    return back_map_occupations(paired, ThermofieldAngles.from_grid(paired.frequencies, beta))
