"""Bond-adaptive one-site TDVP.

Each step is a symmetric left-to-right / right-to-left sweep with half time
steps. Before a site is evolved, the part of ``H|psi>`` that the two-site
tangent space at the adjacent bond would capture but the one-site space
misses is computed explicitly. If its norm exceeds ``precision_p`` the bond is
enlarged by the dominant directions of that residual; the new directions
enter with zero weight, so the state itself is untouched and the subsequent
one-site update stays unitary. Bonds never shrink.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from .krylov import expm_krylov
from .mpo import MpoOperator
from .mps import MpsState

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class EvolutionConfig:
    dt: float = 0.1
    t_final: float = 40.0
    chi_max: int = 40
    precision_p: float = 1e-3
    d: int = 6
    krylov_dim: int = 30
    krylov_tol: float = 1e-12

    def __post_init__(self):
        if not self.dt > 0:
            raise ValueError("dt must be positive")
        if self.t_final < 0:
            raise ValueError("t_final must be non-negative")
        if self.chi_max < 1:
            raise ValueError("chi_max must be >= 1")
        if not self.precision_p > 0:
            raise ValueError("precision_p must be positive")
        if self.d < 2:
            raise ValueError("d must be >= 2")
        steps = self.t_final / self.dt
        if abs(steps - round(steps)) > 1e-9 * max(1.0, steps):
            raise ValueError(f"t_final = {self.t_final} is not a multiple of dt = {self.dt}")

    @property
    def n_steps(self) -> int:
        return int(round(self.t_final / self.dt))


_ONES = np.ones((1, 1, 1), dtype=complex)


def _left_env(env, a, w):
    x = np.tensordot(env, a, ([0], [0]))  # (m, a', t, b)
    x = np.tensordot(x, w, ([0, 2], [0, 3]))  # (a', b, n, s)
    return np.tensordot(x, a.conj(), ([0, 3], [0, 1]))  # (b, n, b')


def _right_env(env, a, w):
    x = np.tensordot(a, env, ([2], [0]))  # (a, t, n, b')
    x = np.tensordot(x, w, ([1, 2], [3, 1]))  # (a, b', m, s)
    return np.tensordot(x, a.conj(), ([1, 3], [2, 1]))  # (a, m, a')


def _apply_site(left, w, right, a):
    x = np.tensordot(left, a, ([0], [0]))  # (m, a', t, b)
    x = np.tensordot(x, w, ([0, 2], [0, 3]))  # (a', b, n, s)
    return np.tensordot(x, right, ([1, 2], [0, 1]))  # (a', s, b')


def _apply_bond(left, right, c):
    x = np.tensordot(left, c, ([0], [0]))  # (m, a', b)
    return np.tensordot(x, right, ([0, 2], [1, 0]))  # (a', b')


def _apply_two_site(left, w1, w2, right, theta):
    x = np.tensordot(left, theta, ([0], [0]))  # (m, a', t1, t2, b)
    x = np.tensordot(x, w1, ([0, 2], [0, 3]))  # (a', t2, b, n, s1)
    x = np.tensordot(x, w2, ([3, 1], [0, 3]))  # (a', b, s1, o, s2)
    return np.tensordot(x, right, ([1, 3], [0, 1]))  # (a', s1, s2, b')


def _n_new_directions(sv: np.ndarray, p: float, limit: int) -> tuple[int, float]:
    """Smallest number of leading singular directions leaving a tail norm <= p (capped at limit)."""
    tail = np.sqrt(np.cumsum((sv**2)[::-1])[::-1])  # tail[k] = |sv[k:]|
    tail = np.append(tail, 0.0)
    k = int(np.argmax(tail <= p))
    k = min(k, limit)
    return k, float(tail[k])


class TdvpIntegrator:
    """Holds the MPO environments between steps of one trajectory."""

    def __init__(self, mpo: MpoOperator, config: EvolutionConfig):
        self.mpo = mpo
        self.config = config
        self._left: list[np.ndarray] = []
        self._right: list[np.ndarray] = []
        self._token: object | None = None

    def _prepare(self, state: MpsState) -> None:
        if state.n_sites != self.mpo.n_sites or state.phys_dims != self.mpo.phys_dims:
            raise ValueError("state and MPO dimensions are incompatible")
        if getattr(state, "_env_token", None) is self._token and self._token is not None and state.center == 0:
            return
        state.move_center(0)
        n = state.n_sites
        ws = self.mpo.site_tensors
        self._left = [_ONES] * n
        self._right = [_ONES] * n
        for i in range(n - 1, 0, -1):
            self._right[i - 1] = _right_env(self._right[i], state.tensors[i], ws[i])

    def energy(self, state: MpsState) -> float:
        """``<H>`` using the cached environments (valid right after :meth:`step`)."""
        self._prepare(state)
        a = state.tensors[0]
        ha = _apply_site(self._left[0], self.mpo.site_tensors[0], self._right[0], a)
        return float(np.vdot(a, ha).real)

    def _expand_right(self, state: MpsState, i: int) -> float:
        """Grow bond (i, i+1) while the center sits on ``i``; returns the residual tail norm."""
        cfg = self.config
        ts, ws = state.tensors, self.mpo.site_tensors
        a, b = ts[i], ts[i + 1]
        cl, d1, cr = a.shape
        _, d2, cr2 = b.shape
        room = min(cl * d1, d2 * cr2) - cr
        if room <= 0:
            return 0.0  # the bond already spans the full space
        limit = min(cfg.chi_max - cr, room)
        theta = np.tensordot(a, b, ([2], [0]))
        m = _apply_two_site(self._left[i], ws[i], ws[i + 1], self._right[i + 1], theta).reshape(cl * d1, d2 * cr2)
        q, _ = np.linalg.qr(a.reshape(cl * d1, cr))
        m -= q @ (q.conj().T @ m)
        bm = b.reshape(cr, d2 * cr2)
        m -= (m @ bm.conj().T) @ bm
        norm = float(np.linalg.norm(m))
        if norm <= cfg.precision_p or limit <= 0:
            return norm  # nothing to add, or at chi_max: report the discarded weight
        _, sv, vh = np.linalg.svd(m, full_matrices=False)
        k, tail = _n_new_directions(sv, cfg.precision_p, limit)
        if k:
            ts[i + 1] = np.concatenate([bm, vh[:k]], axis=0).reshape(cr + k, d2, cr2)
            ts[i] = np.concatenate([a, np.zeros((cl, d1, k), dtype=complex)], axis=2)
            self._right[i] = _right_env(self._right[i + 1], ts[i + 1], ws[i + 1])
        return tail

    def _expand_left(self, state: MpsState, i: int) -> float:
        """Grow bond (i-1, i) while the center sits on ``i``."""
        cfg = self.config
        ts, ws = state.tensors, self.mpo.site_tensors
        p, a = ts[i - 1], ts[i]
        cl0, d0, cl = p.shape
        _, d, cr = a.shape
        room = min(cl0 * d0, d * cr) - cl
        if room <= 0:
            return 0.0
        limit = min(cfg.chi_max - cl, room)
        theta = np.tensordot(p, a, ([2], [0]))
        m = _apply_two_site(self._left[i - 1], ws[i - 1], ws[i], self._right[i], theta).reshape(cl0 * d0, d * cr)
        pm = p.reshape(cl0 * d0, cl)
        m -= pm @ (pm.conj().T @ m)
        q, _ = np.linalg.qr(a.reshape(cl, d * cr).conj().T)
        m -= (m @ q) @ q.conj().T
        norm = float(np.linalg.norm(m))
        if norm <= cfg.precision_p or limit <= 0:
            return norm  # nothing to add, or at chi_max: report the discarded weight
        u, sv, _ = np.linalg.svd(m, full_matrices=False)
        k, tail = _n_new_directions(sv, cfg.precision_p, limit)
        if k:
            ts[i - 1] = np.concatenate([pm, u[:, :k]], axis=1).reshape(cl0, d0, cl + k)
            ts[i] = np.concatenate([a, np.zeros((k, d, cr), dtype=complex)], axis=0)
            self._left[i] = _left_env(self._left[i - 1], ts[i - 1], ws[i - 1])
        return tail

    def _evolve_site(self, state, i, tau):
        left, right, w = self._left[i], self._right[i], self.mpo.site_tensors[i]
        cfg = self.config
        state.tensors[i] = expm_krylov(
            lambda x: _apply_site(left, w, right, x), state.tensors[i], tau, cfg.krylov_dim, cfg.krylov_tol
        )

    def _evolve_bond(self, c, left, right, tau):
        cfg = self.config
        return expm_krylov(lambda x: _apply_bond(left, right, x), c, -tau, cfg.krylov_dim, cfg.krylov_tol)

    def step(self, state: MpsState, dt: float | None = None) -> MpsState:
        """Advance ``state`` in place by ``dt`` (default ``config.dt``) and return it."""
        self._prepare(state)
        dt = self.config.dt if dt is None else dt
        tau = 0.5 * dt
        ts, ws = state.tensors, self.mpo.site_tensors
        n = state.n_sites
        p = self.config.precision_p
        worst = 0.0

        for i in range(n):
            if i < n - 1:
                worst = max(worst, self._expand_right(state, i))
            self._evolve_site(state, i, tau)
            if i < n - 1:
                cl, d, cr = ts[i].shape
                q, r = np.linalg.qr(ts[i].reshape(cl * d, cr))
                ts[i] = q.reshape(cl, d, cr)
                self._left[i + 1] = _left_env(self._left[i], ts[i], ws[i])
                r = self._evolve_bond(r, self._left[i + 1], self._right[i], tau)
                ts[i + 1] = np.tensordot(r, ts[i + 1], ([1], [0]))
                state.center = i + 1

        for i in range(n - 1, -1, -1):
            if i > 0:
                worst = max(worst, self._expand_left(state, i))
            self._evolve_site(state, i, tau)
            if i > 0:
                cl, d, cr = ts[i].shape
                q, r = np.linalg.qr(ts[i].reshape(cl, d * cr).T)
                ts[i] = q.T.reshape(cl, d, cr)
                self._right[i - 1] = _right_env(self._right[i], ts[i], ws[i])
                c = self._evolve_bond(r.T, self._left[i], self._right[i - 1], tau)
                ts[i - 1] = np.tensordot(ts[i - 1], c, ([2], [0]))
                state.center = i - 1

        state.time += dt
        state.max_projection_error = max(state.max_projection_error, worst)
        if worst > p and not state.capped:
            state.capped = True
            log.warning("bond dimension capped at chi_max=%d; projection error %.2e exceeds p=%.1e at t=%.3f",
                        self.config.chi_max, worst, p, state.time)
        self._token = object()
        state._env_token = self._token
        return state


def tdvp_step(state: MpsState, mpo: MpoOperator, config: EvolutionConfig) -> MpsState:
    """One step on a copy of ``state`` (environments built from scratch)."""
    new = state.copy()
    return TdvpIntegrator(mpo, config).step(new)


def n_steps_until(t: float, dt: float) -> int:
    n = t / dt
    if abs(n - round(n)) > 1e-9 * max(1.0, n):
        raise ValueError(f"time {t} is not a multiple of dt={dt}")
    return int(round(n))

