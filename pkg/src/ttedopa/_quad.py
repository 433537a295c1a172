"""Composite Gauss-Legendre rules with geometric grading towards the origin."""

from __future__ import annotations

from functools import lru_cache

import numpy as np


@lru_cache(maxsize=32)
def _legendre(order: int) -> tuple[np.ndarray, np.ndarray]:
    x, w = np.polynomial.legendre.leggauss(order)
    x.setflags(write=False)
    w.setflags(write=False)
    return x, w


def graded_edges(
    lo: float,
    hi: float,
    n_uniform: int,
    grade_scale: float | None = None,
    ratio: float = 0.2,
    floor: float = 1e-24,
) -> np.ndarray:
    """Panel edges on [lo, hi]: ``n_uniform`` equal panels plus a geometric
    cluster ``±grade_scale * ratio**k`` around zero (when zero lies in [lo, hi]).
    """
    if hi <= lo:
        raise ValueError("empty interval")
    edges = [np.linspace(lo, hi, max(n_uniform, 1) + 1)]
    if lo <= 0.0 <= hi:
        span = hi - lo
        scale = span if grade_scale is None else min(grade_scale, span)
        n_geo = int(np.ceil(np.log(floor) / np.log(ratio)))
        geo = scale * ratio ** np.arange(n_geo + 1)
        pts = [0.0]
        if hi > 0:
            pts.extend(geo[geo < hi])
        if lo < 0:
            pts.extend(-geo[-geo > lo])
        edges.append(np.asarray(pts))
    out = np.unique(np.concatenate(edges))
    return out[(out >= lo) & (out <= hi)]


def composite_rule(edges: np.ndarray, order: int) -> tuple[np.ndarray, np.ndarray]:
    """Nodes and weights of an ``order``-point Gauss-Legendre rule on every panel."""
    x, w = _legendre(order)
    a = np.asarray(edges[:-1])[:, None]
    b = np.asarray(edges[1:])[:, None]
    half = 0.5 * (b - a)
    nodes = (a + b) * 0.5 + half * x[None, :]
    weights = half * w[None, :]
    return nodes.ravel(), weights.ravel()
