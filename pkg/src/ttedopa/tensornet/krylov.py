"""Lanczos approximation of ``exp(-i tau H) v`` for Hermitian ``H`` given as a matvec."""

from __future__ import annotations

import numpy as np
from scipy.linalg import eigh_tridiagonal


class KrylovError(RuntimeError):
    pass


def _tridiag_exp_e1(alpha, beta, tau):
    if len(alpha) == 1:
        return np.array([np.exp(-1j * tau * alpha[0])])
    vals, vecs = eigh_tridiagonal(np.asarray(alpha), np.asarray(beta))
    return vecs @ (np.exp(-1j * tau * vals) * vecs[0].conj())


def expm_krylov(matvec, v: np.ndarray, tau: float, max_dim: int = 30, tol: float = 1e-12) -> np.ndarray:
    """``exp(-i tau H) v``; stops when the a-posteriori error estimate drops below ``tol * |v|``."""
    shape = v.shape
    v0 = v.reshape(-1)
    nrm = float(np.linalg.norm(v0))
    if nrm == 0.0:
        return v.copy()
    basis = [v0 / nrm]
    alpha: list[float] = []
    beta: list[float] = []
    for j in range(max_dim):
        w = matvec(basis[j].reshape(shape)).reshape(-1)
        a = float(np.vdot(basis[j], w).real)
        alpha.append(a)
        w = w - a * basis[j]
        if j > 0:
            w = w - beta[j - 1] * basis[j - 1]
        for q in basis:  # one reorthogonalization pass; Krylov spaces here are small
            w = w - np.vdot(q, w) * q
        b = float(np.linalg.norm(w))
        coef = _tridiag_exp_e1(alpha, beta, tau)
        if b < 1e-14 * max(1.0, abs(a)) or b * abs(coef[-1]) < tol:
            break
        if j == max_dim - 1:
            raise KrylovError(f"Krylov exponential not converged in {max_dim} steps (estimate {b * abs(coef[-1]):.1e})")
        beta.append(b)
        basis.append(w / b)
    out = np.zeros_like(v0)
    for c, q in zip(coef, basis):
        out += c * q
    return (nrm * out).reshape(shape)
