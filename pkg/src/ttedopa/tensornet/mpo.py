"""Matrix product operator of the chain-mapped spin-boson Hamiltonian.

    H = eps/2 sz + g0/2 sx (c_0 + c_0^dag) + sum_k w_k n_k + sum_k g_k (c_k^dag c_{k-1} + h.c.)

Virtual channels: 0 = finished, 1 = carries an operator waiting for ``c^dag``,
2 = carries an operator waiting for ``c``, 3 = nothing placed yet.
Tensors have shape ``(w_left, w_right, d_out, d_in)``.
"""

from __future__ import annotations

import numpy as np

from ..chainmap import ChainCoefficients
from ..spectral import SystemModel
from .operators import SIGMA_X, SIGMA_Z, annihilation, creation, number

DONE, WAIT_CDAG, WAIT_C, START = range(4)


class MpoOperator:
    def __init__(self, site_tensors):
        self.site_tensors = [np.asarray(w, dtype=complex) for w in site_tensors]
        for left, right in zip(self.site_tensors[:-1], self.site_tensors[1:]):
            if left.shape[1] != right.shape[0]:
                raise ValueError("MPO bond dimensions do not match")

    @property
    def n_sites(self) -> int:
        return len(self.site_tensors)

    @property
    def mpo_bond_dim(self) -> int:
        return max(w.shape[1] for w in self.site_tensors[:-1]) if self.n_sites > 1 else 1

    @property
    def phys_dims(self) -> list[int]:
        return [w.shape[2] for w in self.site_tensors]

    def to_dense(self) -> np.ndarray:
        """Dense matrix (small instances only), site 0 most significant."""
        acc = self.site_tensors[0][0]  # (w, d, d)
        for w in self.site_tensors[1:]:
            # acc[b, S, S'] * w[b, c, s, s'] -> [c, S s, S' s']
            x = np.tensordot(acc, w, ([0], [0]))  # (S, S', c, s, s')
            x = x.transpose(2, 0, 3, 1, 4)
            c, s1, s2, s3, s4 = x.shape
            acc = x.reshape(c, s1 * s2, s3 * s4)
        return acc[0]


def build_chain_mpo(coeffs: ChainCoefficients, system: SystemModel, d: int) -> MpoOperator:
    if d < 2:
        raise ValueError("local Fock dimension must be >= 2")
    n = coeffs.n_sites
    c, cd, num = annihilation(d), creation(d), number(d)
    eye = np.eye(d, dtype=complex)

    w0 = np.zeros((1, 4, 2, 2), dtype=complex)
    w0[0, DONE] = 0.5 * system.epsilon * SIGMA_Z
    w0[0, WAIT_CDAG] = 0.5 * coeffs.g0 * SIGMA_X
    w0[0, WAIT_C] = 0.5 * coeffs.g0 * SIGMA_X
    w0[0, START] = np.eye(2)
    tensors = [w0]

    for k in range(n):
        w = np.zeros((4, 4, d, d), dtype=complex)
        w[DONE, DONE] = eye
        w[WAIT_CDAG, DONE] = cd
        w[WAIT_C, DONE] = c
        w[START, DONE] = coeffs.omegas[k] * num
        if k < n - 1:
            g = coeffs.couplings[k]
            w[START, WAIT_CDAG] = g * c
            w[START, WAIT_C] = g * cd
        w[START, START] = eye
        if k == n - 1:
            w = w[:, DONE : DONE + 1]
        tensors.append(w)
    return MpoOperator(tensors)
