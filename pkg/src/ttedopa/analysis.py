"""Post-processing: spectral peaks, relaxation fits, double-well picture, pair-correlation diagnostics."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy.optimize import least_squares

from .spectral import SpectralModel, evaluate_sdf

MAX_FIT_ITERATIONS = 500
FIT_XTOL = 1e-10


class FitError(RuntimeError):
    """Least squares did not converge; ``best`` holds the last iterate."""

    def __init__(self, message, best: "FitResult"):
        super().__init__(message)
        self.best = best


@dataclass(frozen=True)
class PeakEstimate:
    location: float
    height: float
    width: float
    window: tuple[float, float]


@dataclass(frozen=True)
class FitResult:
    model_kind: str
    parameters: dict
    residual_rms: float
    n_evaluations: int = 0

    def __getitem__(self, key):
        return self.parameters[key]


# --- peaks ------------------------------------------------------------------------


def _smooth3(y: np.ndarray) -> np.ndarray:
    if len(y) < 3:
        return y.copy()
    out = y.copy()
    out[1:-1] = (y[:-2] + y[1:-1] + y[2:]) / 3.0
    return out


def _vertex(x, y):
    """Vertex of the parabola through three points."""
    (x0, x1, x2), (y0, y1, y2) = x, y
    denom = (x0 - x1) * (x0 - x2) * (x1 - x2)
    a = (x2 * (y1 - y0) + x1 * (y0 - y2) + x0 * (y2 - y1)) / denom
    b = (x2**2 * (y0 - y1) + x1**2 * (y2 - y0) + x0**2 * (y1 - y2)) / denom
    c = (x1 * x2 * (x1 - x2) * y0 + x2 * x0 * (x2 - x0) * y1 + x0 * x1 * (x0 - x1) * y2) / denom
    if a >= 0:
        return x1, y1
    xv = -b / (2 * a)
    return xv, c - b * b / (4 * a)


def _fwhm(x, y, k, half):
    """Full width at ``half`` around index ``k`` by linear interpolation of the crossings."""
    lo = k
    while lo > 0 and y[lo] > half:
        lo -= 1
    hi = k
    while hi < len(y) - 1 and y[hi] > half:
        hi += 1

    def cross(i, j):
        if y[i] == y[j]:
            return x[i]
        return x[i] + (half - y[i]) * (x[j] - x[i]) / (y[j] - y[i])

    left = cross(lo, lo + 1) if y[lo] <= half else x[lo]
    right = cross(hi - 1, hi) if y[hi] <= half else x[hi]
    return float(right - left)


def find_peaks(spectrum, window, rel_floor: float = 0.1) -> list[PeakEstimate]:
    """Local maxima of the 3-point smoothed density inside ``window``.

    ``spectrum`` is an :class:`~ttedopa.observables.ExtendedSpectrum` (its
    ``density`` is used) or a ``(frequencies, density)`` pair. Maxima lower
    than ``rel_floor`` times the largest one in the window are dropped.
    Sub-grid locations come from a parabola through the log-density (or the
    density itself where it is not positive). Sorted by decreasing height.
    """
    if hasattr(spectrum, "density"):
        freqs, dens = np.asarray(spectrum.frequencies), np.asarray(spectrum.density)
    else:
        freqs, dens = (np.asarray(a, dtype=float) for a in spectrum)
    lo, hi = float(min(window)), float(max(window))
    if not hi > lo:
        raise ValueError("empty peak-search window")
    if lo < freqs[0] or hi > freqs[-1]:
        raise ValueError(f"window [{lo}, {hi}] is not inside the grid span [{freqs[0]}, {freqs[-1]}]")
    ys = _smooth3(dens)
    inside = np.flatnonzero((freqs >= lo) & (freqs <= hi))
    candidates = [
        k for k in inside if 0 < k < len(ys) - 1 and ys[k] > ys[k - 1] and ys[k] >= ys[k + 1] and ys[k] > 0
    ]
    if not candidates:
        return []
    top = max(ys[k] for k in candidates)
    peaks = []
    for k in candidates:
        if ys[k] < rel_floor * top:
            continue
        xs, y3 = freqs[k - 1 : k + 2], ys[k - 1 : k + 2]
        if np.all(y3 > 0):
            loc, logh = _vertex(xs, np.log(y3))
            height = math.exp(logh)
        else:
            loc, height = _vertex(xs, y3)
        peaks.append(PeakEstimate(float(loc), float(height), _fwhm(freqs, ys, k, 0.5 * ys[k]), (lo, hi)))
    return sorted(peaks, key=lambda p: -p.height)


# --- fits -------------------------------------------------------------------------

_MODELS = {
    "damped_cosine": (("a", "omega", "gamma"), lambda t, a, w, g: a * np.cos(w * t) * np.exp(-g * t)),
    "shifted_exponential": (("a", "gamma", "c"), lambda t, a, g, c: a * np.exp(-g * t) + c),
}


def fit_curve(t, y, model_kind: str, initial_guess) -> FitResult:
    """Levenberg-Marquardt fit of ``a cos(w t) e^(-G t)`` or ``a e^(-G t) + c``.

    ``initial_guess`` is a mapping or sequence in parameter order
    (``a, omega, gamma`` or ``a, gamma, c``). Deterministic for a given guess.
    A negative decay rate is refitted with ``gamma >= 0`` imposed.
    """
    if model_kind not in _MODELS:
        raise ValueError(f"unknown model kind {model_kind!r}; expected one of {sorted(_MODELS)}")
    names, f = _MODELS[model_kind]
    t = np.asarray(t, dtype=float)
    y = np.asarray(y, dtype=float)
    if t.shape != y.shape or t.ndim != 1:
        raise ValueError("t and y must be 1-D arrays of equal length")
    if len(t) < 4 * len(names):
        raise ValueError(f"need at least {4 * len(names)} samples for {model_kind}")
    if isinstance(initial_guess, dict):
        p0 = np.array([initial_guess[n] for n in names], dtype=float)
    else:
        p0 = np.asarray(initial_guess, dtype=float)

    def resid(p):
        return f(t, *p) - y

    max_nfev = MAX_FIT_ITERATIONS * (len(names) + 1)
    sol = least_squares(resid, p0, method="lm", xtol=FIT_XTOL, ftol=1e-15, gtol=1e-15, max_nfev=max_nfev)
    gi = names.index("gamma")
    if sol.x[gi] < 0:
        lower = np.full(len(names), -np.inf)
        lower[gi] = 0.0
        start = sol.x.copy()
        start[gi] = 0.0
        sol = least_squares(resid, start, method="trf", bounds=(lower, np.inf), xtol=FIT_XTOL, max_nfev=max_nfev)
    result = FitResult(
        model_kind,
        dict(zip(names, (float(v) for v in sol.x))),
        float(np.sqrt(np.mean(sol.fun**2))),
        int(sol.nfev),
    )
    if sol.status <= 0:
        raise FitError(f"{model_kind} fit did not converge: {sol.message}", result)
    return result


# --- reaction-coordinate picture --------------------------------------------------


@dataclass(frozen=True)
class DoubleWell:
    q: np.ndarray
    upper: np.ndarray
    lower: np.ndarray
    minima: tuple[float, ...]
    min_energy: float
    barrier: float


def adiabatic_potential(epsilon: float, g0: float, omega0: float, q_grid) -> DoubleWell:
    """Adiabatic branches ``V(q) = w0 q^2 +- sqrt(eps^2/4 + 4 g0^2 q^2)``.

    ``q`` is the coherent displacement of the first bath mode for a coupling
    ``g0 sx (c0 + c0^dag)``. The lower branch is a double well when
    ``2 g0^2 / w0 > eps / 2``; minima and barrier are the analytic values.
    """
    if not omega0 > 0:
        raise ValueError("omega0 must be positive")
    q = np.asarray(q_grid, dtype=float)
    root = np.sqrt(0.25 * epsilon**2 + 4.0 * g0**2 * q**2)
    upper = omega0 * q**2 + root
    lower = omega0 * q**2 - root
    if g0 != 0 and 2.0 * g0**2 / omega0 > 0.5 * abs(epsilon):
        qmin = math.sqrt(g0**2 / omega0**2 - epsilon**2 / (16.0 * g0**2))
        emin = -(g0**2) / omega0 - epsilon**2 * omega0 / (16.0 * g0**2)
        return DoubleWell(q, upper, lower, (-qmin, qmin), emin, -0.5 * abs(epsilon) - emin)
    return DoubleWell(q, upper, lower, (0.0,), -0.5 * abs(epsilon), 0.0)


@dataclass(frozen=True)
class PolaronPrediction:
    frequencies: np.ndarray
    matrix: np.ndarray
    prefactor: float  # matrix = prefactor * (w w')**((s - 2) / 2), prefactor = 2 alpha omega_c**(2 - s)


def polaron_correlation_prediction(model: SpectralModel, grid) -> PolaronPrediction:
    """``C(w, w') = omega_c sqrt(J(w) J(w')) / (w w')`` on the positive points of ``grid``."""
    w = np.asarray(grid, dtype=float)
    w = w[w > 0]
    amp = np.sqrt(evaluate_sdf(model, w)) / w
    return PolaronPrediction(w, model.omega_c * np.outer(amp, amp), 2.0 * model.alpha * model.omega_c ** (2.0 - model.s))


def cosine_similarity(a: np.ndarray, b: np.ndarray) -> float:
    a = np.ravel(a)
    b = np.ravel(b)
    na, nb = np.linalg.norm(a), np.linalg.norm(b)
    if na == 0 or nb == 0:
        return 0.0
    return float(np.real(np.vdot(a, b)) / (na * nb))


def polaron_similarity(spectrum, model: SpectralModel, band=(0.5, 1.0)) -> float:
    """Cosine similarity of ``|C(w, w')|`` with the polaron prediction over ``band * omega_c``."""
    w = spectrum.frequencies
    sel = np.flatnonzero((w >= band[0] * model.omega_c) & (w <= band[1] * model.omega_c))
    pred = polaron_correlation_prediction(model, w[sel]).matrix
    return cosine_similarity(np.abs(spectrum.corr[np.ix_(sel, sel)]), pred)


# --- thermal cycle ----------------------------------------------------------------


def window_population(spectrum, center: float, delta: float) -> float:
    """Sum of mode occupations with ``|w - center| <= delta``."""
    w = spectrum.frequencies
    return float(np.sum(spectrum.occupations[np.abs(w - center) <= delta]))


def ridge_statistic(spectrum, center: float, delta: float) -> dict:
    """Strength of the opposite-frequency pair correlations around ``+-center``.

    For every positive mode within ``delta`` of ``center`` the anti-diagonal
    value ``|C(w, -w)|`` is read at the nearest negative mode. The reference
    is the median of ``|C(w, w')|`` over the same rows and all modes ``w'``
    farther than ``4 delta`` from ``-w``. Returns ridge, reference and ratio.
    """
    w = spectrum.frequencies
    rows = np.flatnonzero(np.abs(w - center) <= delta)
    neg = np.flatnonzero(w < 0)
    if len(rows) == 0 or len(neg) == 0:
        return {"ridge": None, "reference": None, "ratio": None}
    absc = np.abs(spectrum.corr)
    ridge_vals, off_vals = [], []
    for i in rows:
        ridge_vals.append(absc[i, neg[np.argmin(np.abs(w[neg] + w[i]))]])
        off_vals.append(absc[i, np.abs(w + w[i]) > 4.0 * delta])
    ridge = float(np.mean(ridge_vals))
    ref = float(np.median(np.concatenate(off_vals)))
    if ref > 0:
        ratio = ridge / ref
    else:
        ratio = 0.0 if ridge == 0 else float("inf")
    return {"ridge": ridge, "reference": ref, "ratio": ratio}


@dataclass
class CycleReport:
    times: tuple[float, float]
    beta: float
    epsilon_bar: float | None = None
    positive_peak: dict | None = None
    negative_peak: dict | None = None
    positive_population: tuple[float, float] | None = None
    negative_population: tuple[float, float] | None = None
    positive_grows: bool | None = None
    negative_grows: bool | None = None
    balance_ratio: float | None = None
    balance_expected: float | None = None
    balance_relative_error: float | None = None
    ridge: dict = field(default_factory=dict)
    flagged: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return asdict(self)


def thermal_cycle_report(early, late, beta: float, epsilon: float, delta: float = 0.02, window=None) -> CycleReport:
    """Peak populations at ``+-eps_bar`` at two snapshots, their balance and the pair ridge.

    ``window`` defaults to ``[0.5 eps, 1.5 eps]`` (mirrored for the negative
    peak). ``eps_bar`` is the location of the strongest positive peak of the
    later snapshot.
    """
    if late.time < early.time:
        raise ValueError("snapshots must be ordered in time")
    lo, hi = window if window is not None else (0.5 * epsilon, 1.5 * epsilon)
    rep = CycleReport((early.time, late.time), beta)
    pos = find_peaks(late, (lo, hi))
    neg = find_peaks(late, (-hi, -lo)) if late.frequencies[0] <= -hi else []
    if not pos:
        rep.flagged.append("no positive peak")
        return rep
    eb = pos[0].location
    rep.epsilon_bar = eb
    rep.positive_peak = asdict(pos[0])
    if neg:
        rep.negative_peak = asdict(neg[0])
    else:
        rep.flagged.append("no negative peak")
    p0, p1 = window_population(early, eb, delta), window_population(late, eb, delta)
    n0, n1 = window_population(early, -eb, delta), window_population(late, -eb, delta)
    rep.positive_population = (p0, p1)
    rep.negative_population = (n0, n1)
    rep.positive_grows = p1 > p0
    rep.negative_grows = n1 > n0
    if n1 > 0:
        rep.balance_ratio = p1 / n1
        expected = math.exp(beta * eb) if beta * eb < 700 else float("inf")
        rep.balance_expected = expected
        rep.balance_relative_error = abs(rep.balance_ratio / expected - 1.0) if math.isfinite(expected) else None
    rep.ridge = ridge_statistic(late, eb, delta)
    return rep
