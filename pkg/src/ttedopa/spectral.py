"""Power-law bath spectral densities and their thermalized (signed-frequency) extension.

All frequencies are in the same units as ``omega_c``; ``beta`` is in inverse units.
``beta = inf`` is accepted and means zero temperature.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Union

import numpy as np

from ._quad import composite_rule, graded_edges


class QuadratureError(RuntimeError):
    """Two independent quadratures of the same integral disagree."""


@dataclass(frozen=True)
class SpectralModel:
    """Hard-cutoff power law ``J(w) = 2 alpha w (w/omega_c)**(s-1)`` on ``[0, omega_c]``."""

    s: float
    alpha: float
    omega_c: float = 1.0

    def __post_init__(self):
        if not (self.s > 0 and self.alpha > 0 and self.omega_c > 0):
            raise ValueError(f"need s, alpha, omega_c > 0, got {self}")

    def __call__(self, omega):
        return evaluate_sdf(self, omega)


@dataclass(frozen=True)
class ThermalizedSpectralModel:
    """Thermally weighted extension of ``base`` to ``[-omega_c, omega_c]``.

    ``epsilon`` is the gap of the attached two-level system; it only serves to
    report ``kappa = epsilon * beta``.
    """

    base: SpectralModel
    beta: float
    epsilon: float | None = None

    def __post_init__(self):
        if not self.beta > 0:
            raise ValueError("beta must be positive (inf for zero temperature)")

    @classmethod
    def from_kappa(cls, base: SpectralModel, kappa: float, epsilon: float) -> "ThermalizedSpectralModel":
        if epsilon <= 0 or kappa <= 0:
            raise ValueError("kappa and epsilon must be positive")
        return cls(base, kappa / epsilon, epsilon)

    @property
    def kappa(self) -> float | None:
        return None if self.epsilon is None else self.epsilon * self.beta

    @property
    def omega_c(self) -> float:
        return self.base.omega_c

    @property
    def support(self) -> tuple[float, float]:
        wc = self.base.omega_c
        return (0.0, wc) if math.isinf(self.beta) else (-wc, wc)

    def __call__(self, omega):
        return evaluate_thermalized_sdf(self, omega)


BlochState = tuple  # ("bloch", theta, phi)
InitialState = Union[str, BlochState]

_NAMED_STATES = ("excited", "ground", "plus", "minus")


@dataclass(frozen=True)
class SystemModel:
    """Two-level system ``H_S = epsilon sigma_z / 2``.

    Local basis ordering is (excited, ground), so ``sigma_z = diag(1, -1)``.
    """

    epsilon: float = 0.2
    initial_state: InitialState = "excited"

    def __post_init__(self):
        if self.epsilon < 0:
            raise ValueError("epsilon must be non-negative")
        self.state_vector()  # validates initial_state

    def state_vector(self) -> np.ndarray:
        st = self.initial_state
        if isinstance(st, str):
            if st == "excited":
                return np.array([1.0, 0.0], dtype=complex)
            if st == "ground":
                return np.array([0.0, 1.0], dtype=complex)
            if st in ("plus", "minus"):
                sign = 1.0 if st == "plus" else -1.0
                return np.array([1.0, sign], dtype=complex) / math.sqrt(2.0)
            raise ValueError(f"unknown initial state {st!r}; expected one of {_NAMED_STATES} or ('bloch', theta, phi)")
        if len(st) == 3 and st[0] == "bloch":
            theta, phi = float(st[1]), float(st[2])
            return np.array([math.cos(theta / 2), np.exp(1j * phi) * math.sin(theta / 2)], dtype=complex)
        raise ValueError(f"bad initial state {st!r}")


def evaluate_sdf(model: SpectralModel, omega):
    """``J(omega)``; zero outside ``[0, omega_c]`` (negative frequencies included)."""
    w = np.asarray(omega, dtype=float)
    wc = model.omega_c
    inside = (w >= 0) & (w <= wc)
    wpos = np.where(inside, w, 0.0)
    with np.errstate(divide="ignore", invalid="ignore"):
        val = 2.0 * model.alpha * wpos * np.power(wpos / wc, model.s - 1.0)
    out = np.where(inside & (wpos > 0), val, 0.0)
    return out if out.ndim else float(out)


def _origin_limit(model: ThermalizedSpectralModel) -> float:
    s, a, beta = model.base.s, model.base.alpha, model.beta
    if math.isinf(beta):
        return 0.0
    if s == 1.0:
        return 2.0 * a / beta
    # s < 1 diverges like |w|**(s-1); integrators use graded panels instead of this value
    return 0.0 if s > 1.0 else math.inf


def evaluate_thermalized_sdf(model: ThermalizedSpectralModel, omega):
    """``J_beta(w) = sign(w) J(|w|) / (1 - exp(-beta w))``.

    Identical to ``(1/2) sign(w) J(|w|) [1 + coth(beta w / 2)]`` but evaluated with
    ``expm1`` so that small ``|beta w|`` does not cancel.
    """
    w = np.asarray(omega, dtype=float)
    beta = model.beta
    j = evaluate_sdf(model.base, np.abs(w))
    with np.errstate(over="ignore", divide="ignore", invalid="ignore"):
        if math.isinf(beta):
            out = np.where(w > 0, j, 0.0)
        else:
            denom = -np.expm1(-beta * w)
            out = np.sign(w) * j / denom
    out = np.where(w == 0, _origin_limit(model), out)
    out = np.where(np.isnan(out), 0.0, out)
    return out if out.ndim else float(out)


def bose_einstein(omega, beta: float):
    """Bose-Einstein occupation ``1/(exp(beta w) - 1)``; zero when ``beta`` is infinite."""
    w = np.asarray(omega, dtype=float)
    if math.isinf(beta):
        out = np.zeros_like(w)
    else:
        with np.errstate(over="ignore", divide="ignore"):
            out = 1.0 / np.expm1(beta * w)
    return out if out.ndim else float(out)


def rescaled_alpha(alpha_prime: float, s: float, epsilon: float) -> float:
    """Coupling ``alpha'/epsilon**s`` that keeps the golden-rule TLS decay rate fixed across ``s``."""
    if epsilon == 0:
        raise ValueError("epsilon must be non-zero to rescale the coupling")
    return alpha_prime / epsilon**s


def markovian_decay_sdf_value(model: ThermalizedSpectralModel, epsilon: float) -> float:
    """``alpha eps (eps**s / omega_c**(s-1)) (1 + coth(beta eps / 2))``.

    With ``alpha = alpha'/eps**s`` this is ``alpha' eps (1 + coth) / omega_c**(s-1)``
    and therefore independent of ``s`` at ``omega_c = 1``.
    """
    base = model.base
    if not 0 < epsilon < base.omega_c:
        raise ValueError("epsilon must lie strictly inside (0, omega_c)")
    if math.isinf(model.beta):
        thermal = 2.0
    else:
        thermal = 2.0 / -math.expm1(-model.beta * epsilon)
    return base.alpha * epsilon * epsilon**base.s / base.omega_c ** (base.s - 1.0) * thermal


def _panel_count(omega_c: float, t_max: float, span: float) -> int:
    # roughly two radians of phase per panel
    return max(8, int(math.ceil(span * (1.0 + t_max) / 2.0)))


def bath_correlation(
    model: ThermalizedSpectralModel,
    t,
    quadrature_points: int = 32,
    *,
    rtol: float = 1e-8,
    return_diagnostic: bool = False,
):
    """Bath two-time correlation ``S(t)``.

    Computed twice: from the thermal occupations of the physical bath on
    ``[0, omega_c]`` and from the vacuum of the extended bath on
    ``[-omega_c, omega_c]``, each on its own panel layout. The extended-bath
    value is returned. Raises :class:`QuadratureError` when the two disagree
    by more than ``rtol * |S(0)|``.
    """
    if quadrature_points < 16:
        raise ValueError("quadrature_points must be >= 16")
    t_arr = np.atleast_1d(np.asarray(t, dtype=float))
    wc = model.omega_c
    beta = model.beta
    t_max = float(np.max(np.abs(t_arr))) if t_arr.size else 0.0
    grade = wc if math.isinf(beta) else min(wc, 10.0 / beta)

    edges_a = graded_edges(0.0, wc, _panel_count(wc, t_max, wc), grade_scale=grade, ratio=0.25)
    xa, wa = composite_rule(edges_a, quadrature_points)
    j = evaluate_sdf(model.base, xa)
    n = bose_einstein(xa, beta)
    phase = np.exp(-1j * np.outer(t_arr, xa))
    s_a = (phase * (j * (1.0 + n) * wa)).sum(axis=1) + (phase.conj() * (j * n * wa)).sum(axis=1)
    s0 = float(np.sum(j * (1.0 + 2.0 * n) * wa))

    lo, hi = model.support
    edges_b = graded_edges(lo, hi, _panel_count(wc, t_max, hi - lo), grade_scale=grade, ratio=0.15)
    xb, wb = composite_rule(edges_b, quadrature_points + 5)
    jb = evaluate_thermalized_sdf(model, xb)
    s_b = (np.exp(-1j * np.outer(t_arr, xb)) * (jb * wb)).sum(axis=1)

    diff = np.abs(s_a - s_b)
    if np.any(diff > rtol * abs(s0)):
        raise QuadratureError(
            f"thermal and extended-bath correlation differ by {diff.max():.3e} "
            f"(|S(0)| = {s0:.3e}); increase quadrature_points"
        )
    out = s_b if np.ndim(t) else s_b[0]
    if return_diagnostic:
        return out, (diff if np.ndim(t) else float(diff[0]))
    return out
