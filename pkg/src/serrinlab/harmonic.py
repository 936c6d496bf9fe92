"""Homogeneous harmonic polynomials in N variables.

For each degree k the harmonic polynomials form the null space of the
Laplacian acting from degree-k to degree-(k-2) monomials; an orthonormal basis
of that null space (in monomial-coefficient space) is taken with
``scipy.linalg.null_space``.  Degree 1 gives the coordinates, and in the plane
every degree contributes two functions spanning ``Re z^k, Im z^k``.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from itertools import combinations_with_replacement

import numpy as np
from scipy import linalg


def monomial_exponents(dim: int, degree: int) -> np.ndarray:
    """All exponent vectors of total degree ``degree``, shape (m, dim)."""
    out = []
    for combo in combinations_with_replacement(range(dim), degree):
        e = np.zeros(dim, dtype=int)
        for i in combo:
            e[i] += 1
        out.append(e)
    if not out:
        out = [np.zeros(dim, dtype=int)]
    return np.array(out, dtype=int)


def _laplacian_matrix(dim: int, degree: int) -> np.ndarray:
    src = monomial_exponents(dim, degree)
    dst = monomial_exponents(dim, degree - 2)
    index = {tuple(e): i for i, e in enumerate(dst)}
    L = np.zeros((len(dst), len(src)))
    for j, e in enumerate(src):
        for i in range(dim):
            if e[i] >= 2:
                f = e.copy()
                f[i] -= 2
                L[index[tuple(f)], j] += e[i] * (e[i] - 1)
    return L


@lru_cache(maxsize=None)
def _basis(dim: int, degree: int):
    exps, blocks = [], []
    for k in range(1, degree + 1):
        E = monomial_exponents(dim, k)
        C = np.eye(len(E)) if k < 2 else linalg.null_space(_laplacian_matrix(dim, k))
        exps.append(E)
        blocks.append(C)
    E = np.vstack(exps)
    C = linalg.block_diag(*blocks)
    degs = np.concatenate([np.full(b.shape[1], k + 1) for k, b in enumerate(blocks)])
    return E, C, degs


@dataclass(frozen=True, eq=False)
class HarmonicBasis:
    """Non-constant harmonic polynomials of degree 1..degree about a center.

    ``v_j(x) = P_j(Q (x - center) / scale)`` with an orthogonal ``Q`` (identity
    by default) so rotated bases can be compared.
    """

    dim: int
    degree: int
    center: np.ndarray
    scale: float = 1.0
    rotation: np.ndarray | None = None

    @property
    def exponents(self) -> np.ndarray:
        return _basis(self.dim, self.degree)[0]

    @property
    def coefficients(self) -> np.ndarray:
        return _basis(self.dim, self.degree)[1]

    @property
    def degrees(self) -> np.ndarray:
        return _basis(self.dim, self.degree)[2]

    @property
    def size(self) -> int:
        return self.coefficients.shape[1]

    def evaluate(self, points):
        """(values (m, n), gradients (m, n, dim)) of all basis functions."""
        x = np.atleast_2d(np.asarray(points, dtype=float)) - self.center
        Q = np.eye(self.dim) if self.rotation is None else np.asarray(self.rotation, float)
        y = x @ Q.T / self.scale
        E, C, _ = _basis(self.dim, self.degree)
        kmax = int(E.max())
        pw = y[:, :, None] ** np.arange(kmax + 1)[None, None, :]  # (m, dim, k)
        cols = np.arange(self.dim)
        fac = pw[:, cols[None, :], E]  # (m, n_mono, dim)
        mono = np.prod(fac, axis=2)
        dmono = np.empty(mono.shape + (self.dim,))
        for i in range(self.dim):
            Ei = E[:, i]
            lower = pw[:, i, np.maximum(Ei - 1, 0)] * Ei
            others = np.prod(np.delete(fac, i, axis=2), axis=2)
            dmono[:, :, i] = lower * others
        vals = mono @ C
        grads_y = np.einsum("mpi,pn->mni", dmono, C) / self.scale
        grads = grads_y @ Q  # chain rule: grad_x = Q^T grad_y
        return vals, grads
