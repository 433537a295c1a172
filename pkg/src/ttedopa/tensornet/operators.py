"""Local operators. Two-level basis is (excited, ground); bosons are truncated to ``d`` Fock levels."""

import numpy as np

SIGMA_X = np.array([[0, 1], [1, 0]], dtype=complex)
SIGMA_Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
SIGMA_Z = np.array([[1, 0], [0, -1]], dtype=complex)
IDENTITY_2 = np.eye(2, dtype=complex)


def annihilation(d: int) -> np.ndarray:
    return np.diag(np.sqrt(np.arange(1, d, dtype=float)), 1).astype(complex)


def creation(d: int) -> np.ndarray:
    return annihilation(d).T.copy()


def number(d: int) -> np.ndarray:
    return np.diag(np.arange(d, dtype=float)).astype(complex)


def top_projector(d: int) -> np.ndarray:
    p = np.zeros((d, d), dtype=complex)
    p[-1, -1] = 1.0
    return p
