"""Matrix product state of a two-level system followed by a bosonic chain.

Site tensors have shape ``(chi_left, d, chi_right)``. Site 0 is the two-level
system, sites ``1..N`` are chain modes ``0..N-1``. The state is kept in
mixed-canonical form around ``center``.
"""

from __future__ import annotations

import numpy as np

from ..spectral import SystemModel


def _transfer(env: np.ndarray, a: np.ndarray, op: np.ndarray | None = None) -> np.ndarray:
    x = np.tensordot(env, a, ([0], [0]))  # (a', t, b)
    if op is not None:
        x = np.tensordot(x, op, ([1], [1])).transpose(0, 2, 1)  # (a', s, b)
    return np.tensordot(x, a.conj(), ([0, 1], [0, 1]))  # (b, b')


class MpsState:
    """Mixed-canonical MPS with bookkeeping of evolution time and warnings."""

    def __init__(self, tensors, center: int = 0, time: float = 0.0):
        self.tensors = [np.ascontiguousarray(t, dtype=complex) for t in tensors]
        if any(t.ndim != 3 for t in self.tensors):
            raise ValueError("site tensors must be rank 3")
        for left, right in zip(self.tensors[:-1], self.tensors[1:]):
            if left.shape[2] != right.shape[0]:
                raise ValueError("bond dimensions of neighbouring tensors differ")
        if not 0 <= center < len(self.tensors):
            raise IndexError("center out of range")
        self.center = center
        self.time = float(time)
        self.max_projection_error = 0.0
        self.capped = False

    @property
    def n_sites(self) -> int:
        return len(self.tensors)

    @property
    def phys_dims(self) -> list[int]:
        return [t.shape[1] for t in self.tensors]

    @property
    def bond_dims(self) -> list[int]:
        return [t.shape[2] for t in self.tensors[:-1]]

    def copy(self) -> "MpsState":
        new = MpsState([t.copy() for t in self.tensors], self.center, self.time)
        new.max_projection_error = self.max_projection_error
        new.capped = self.capped
        return new

    def norm(self) -> float:
        return float(np.linalg.norm(self.tensors[self.center]))

    def full_norm(self) -> float:
        """Norm from a complete transfer-matrix contraction (no gauge assumption)."""
        env = np.ones((1, 1), dtype=complex)
        for a in self.tensors:
            env = _transfer(env, a)
        return float(np.sqrt(abs(env[0, 0])))

    def move_center(self, target: int) -> None:
        if not 0 <= target < self.n_sites:
            raise IndexError("center target out of range")
        ts = self.tensors
        while self.center < target:
            i = self.center
            cl, d, cr = ts[i].shape
            q, r = np.linalg.qr(ts[i].reshape(cl * d, cr))
            ts[i] = q.reshape(cl, d, q.shape[1])
            ts[i + 1] = np.tensordot(r, ts[i + 1], ([1], [0]))
            self.center += 1
        while self.center > target:
            i = self.center
            cl, d, cr = ts[i].shape
            q, r = np.linalg.qr(ts[i].reshape(cl, d * cr).T)
            ts[i] = q.T.reshape(q.shape[1], d, cr)
            ts[i - 1] = np.tensordot(ts[i - 1], r.T, ([2], [0]))
            self.center -= 1

    def _check_site(self, site: int, op: np.ndarray) -> None:
        if not 0 <= site < self.n_sites:
            raise IndexError(f"site {site} out of range 0..{self.n_sites - 1}")
        d = self.tensors[site].shape[1]
        if op.shape != (d, d):
            raise ValueError(f"operator of shape {op.shape} does not act on site {site} (dimension {d})")

    def _contract(self, ops: dict[int, np.ndarray]) -> complex:
        lo = min(min(ops), self.center)
        hi = max(max(ops), self.center)
        env = np.eye(self.tensors[lo].shape[0], dtype=complex)
        for k in range(lo, hi + 1):
            env = _transfer(env, self.tensors[k], ops.get(k))
        return complex(np.trace(env))

    def expect_local(self, site: int, op: np.ndarray) -> complex:
        op = np.asarray(op, dtype=complex)
        self._check_site(site, op)
        return self._contract({site: op})

    def expect_two_point(self, site_a: int, op_a: np.ndarray, site_b: int, op_b: np.ndarray) -> complex:
        """``<op_a(site_a) op_b(site_b)>`` for ``site_a <= site_b``."""
        op_a = np.asarray(op_a, dtype=complex)
        op_b = np.asarray(op_b, dtype=complex)
        self._check_site(site_a, op_a)
        self._check_site(site_b, op_b)
        if site_a > site_b:
            raise ValueError("need site_a <= site_b")
        if site_a == site_b:
            return self._contract({site_a: op_a @ op_b})
        return self._contract({site_a: op_a, site_b: op_b})

    def reduced_density_matrix(self, site: int) -> np.ndarray:
        """Single-site reduced density matrix ``rho[s, s']``."""
        d = self.tensors[site].shape[1]
        rho = np.empty((d, d), dtype=complex)
        for s in range(d):
            for sp in range(d):
                proj = np.zeros((d, d), dtype=complex)
                proj[sp, s] = 1.0  # |s'><s| gives rho[s, s']
                rho[s, sp] = self._contract({site: proj})
        return rho

    def to_dense(self) -> np.ndarray:
        """Full state vector (small instances only); site 0 is the most significant index."""
        psi = self.tensors[0]
        for a in self.tensors[1:]:
            psi = np.tensordot(psi, a, ([psi.ndim - 1], [0]))
        return psi.reshape(-1)


def product_state(local_vectors, time: float = 0.0) -> MpsState:
    tensors = []
    for v in local_vectors:
        v = np.asarray(v, dtype=complex)
        tensors.append((v / np.linalg.norm(v)).reshape(1, -1, 1))
    return MpsState(tensors, center=0, time=time)


def init_state(system: SystemModel, n_sites: int, d: int) -> MpsState:
    """``|psi_S> (x) |0>^N`` with all bonds of dimension one."""
    vac = np.zeros(d, dtype=complex)
    vac[0] = 1.0
    return product_state([system.state_vector()] + [vac] * n_sites)


def canonical_errors(state: MpsState) -> tuple[float, float]:
    """Largest deviation from left (right) orthonormality left (right) of the center."""
    left = right = 0.0
    for i, a in enumerate(state.tensors):
        cl, d, cr = a.shape
        if i < state.center:
            m = a.reshape(cl * d, cr)
            left = max(left, float(np.max(np.abs(m.conj().T @ m - np.eye(cr)))))
        elif i > state.center:
            m = a.reshape(cl, d * cr)
            right = max(right, float(np.max(np.abs(m @ m.conj().T - np.eye(cl)))))
    return left, right
