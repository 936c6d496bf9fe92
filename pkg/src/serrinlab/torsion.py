"""The torsion function: Delta u = N in Omega, u = 0 on the boundary.

Ellipsoids have the closed form ``u = c (sum x_i^2/a_i^2 - 1)``.  Plane
Fourier domains are solved by splitting ``u = |x|^2/2 + phi`` with ``phi``
harmonic and ``phi = -|x|^2/2`` on the boundary; ``phi`` is fitted by least
squares in the harmonic polynomials ``Re z^k, Im z^k``.  In both cases the
Laplacian of the returned Hessian is exactly ``N``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numpy.polynomial import polynomial as P
from scipy import linalg

from .errors import IllConditioned, OutsideDomain, UnsupportedDimension
from .geometry import (
    TWO_PI,
    BoundaryGrid,
    Domain,
    Ellipsoid,
    boundary_grid,
    refine_boundary_extreme,
)

DEFAULT_DEGREE = 40
CONDITION_LIMIT = 1e14


class TorsionField:
    """Evaluator for u, grad u and the Hessian of u."""

    domain: Domain
    boundary_residual: float

    @property
    def dim(self) -> int:
        return self.domain.dim

    @property
    def exact(self) -> bool:
        """True for closed-form solutions."""
        return False

    def evaluate(self, points):
        """Vectorised (u, grad, hess) at an (m, N) array, no domain check."""
        raise NotImplementedError

    def eval(self, x, tol: float = 1e-12):
        """(u, grad u, hess u) at a single point of the closed domain."""
        x = np.asarray(x, dtype=float).reshape(1, -1)
        if x.shape[1] != self.dim:
            raise ValueError(f"point has dimension {x.shape[1]}, field has {self.dim}")
        if not bool(self.domain.contains(x, tol)[0]):
            raise OutsideDomain(f"x = {x[0].tolist()} lies outside the domain")
        u, g, h = self.evaluate(x)
        return float(u[0]), g[0], h[0]

    def normal_derivative(self, bgrid: BoundaryGrid) -> np.ndarray:
        _, g, _ = self.evaluate(bgrid.nodes)
        return np.einsum("ij,ij->i", g, bgrid.normals)


@dataclass(frozen=True, eq=False)
class EllipsoidTorsion(TorsionField):
    domain: Ellipsoid
    c: float
    boundary_residual: float = 0.0

    @property
    def exact(self) -> bool:
        return True

    def evaluate(self, points):
        x = np.atleast_2d(np.asarray(points, dtype=float))
        a2 = self.domain.a ** 2
        u = self.c * ((x * x) @ (1.0 / a2) - 1.0)
        grad = 2.0 * self.c * x / a2
        hess = np.broadcast_to(np.diag(2.0 * self.c / a2), (len(x), self.dim, self.dim))
        return u, grad, hess


@dataclass(frozen=True, eq=False)
class HarmonicSplitTorsion(TorsionField):
    """u(x) = |x|^2/2 + s^2 Re f(z/s) with f a complex polynomial of degree K."""

    domain: Domain
    coefficients: np.ndarray  # complex c_k; alpha_k = Re c_k, beta_k = -Im c_k
    scale: float
    boundary_residual: float
    condition: float

    @property
    def degree(self) -> int:
        return len(self.coefficients) - 1

    @property
    def alpha(self) -> np.ndarray:
        return self.coefficients.real.copy()

    @property
    def beta(self) -> np.ndarray:
        return -self.coefficients.imag.copy()

    def evaluate(self, points):
        x = np.atleast_2d(np.asarray(points, dtype=float))
        s = self.scale
        z = (x[:, 0] + 1j * x[:, 1]) / s
        c = self.coefficients
        f = P.polyval(z, c)
        f1 = P.polyval(z, P.polyder(c))
        f2 = P.polyval(z, P.polyder(c, 2))
        u = 0.5 * np.sum(x * x, axis=1) + s * s * f.real
        grad = x + s * np.stack([f1.real, -f1.imag], axis=-1)
        hess = np.empty((len(x), 2, 2))
        hess[:, 0, 0] = 1.0 + f2.real
        hess[:, 1, 1] = 1.0 - f2.real
        hess[:, 0, 1] = hess[:, 1, 0] = -f2.imag
        return u, grad, hess


def solve_ellipsoid(domain: Ellipsoid) -> EllipsoidTorsion:
    """Closed-form torsion function, c = N / (2 sum a_i^-2)."""
    if not isinstance(domain, Ellipsoid):
        raise TypeError("solve_ellipsoid needs an Ellipsoid")
    c = domain.dim / (2.0 * float(np.sum(domain.a ** -2.0)))
    return EllipsoidTorsion(domain, c)


def _harmonic_matrix(z: np.ndarray, K: int) -> np.ndarray:
    """Columns 1, Re z^k, Im z^k (k = 1..K)."""
    pw = z[:, None] ** np.arange(1, K + 1)[None, :]
    return np.hstack([np.ones((len(z), 1)), pw.real, pw.imag])


def solve_fourier2d(domain: Domain, degree: int = DEFAULT_DEGREE,
                    n_fit: int | None = None) -> HarmonicSplitTorsion:
    """Least-squares harmonic-polynomial solve on a plane star-shaped domain."""
    if domain.dim != 2:
        raise UnsupportedDimension("solve_fourier2d needs a plane domain")
    K = int(degree)
    if K < 4:
        raise ValueError(f"solver degree must be >= 4, got {K}")
    geom_deg = getattr(domain, "degree", 2)
    n_fit = int(n_fit or max(4 * K, 8 * geom_deg + 16, 64))
    t = TWO_PI * np.arange(n_fit) / n_fit
    x = domain.curve(t)[0]
    s = float(np.max(np.hypot(x[:, 0], x[:, 1])))
    z = (x[:, 0] + 1j * x[:, 1]) / s
    A = _harmonic_matrix(z, K)
    b = -0.5 * np.abs(z) ** 2
    norms = np.linalg.norm(A, axis=0)
    Q, R, piv = linalg.qr(A / norms, mode="economic", pivoting=True)
    diag = np.abs(np.diag(R))
    cond = float(diag[0] / diag[-1]) if diag[-1] > 0 else math.inf
    if cond > CONDITION_LIMIT:
        raise IllConditioned(f"collocation system condition estimate {cond:.3g} exceeds "
                             f"{CONDITION_LIMIT:.0e} (degree {K})")
    y = linalg.solve_triangular(R, Q.T @ b)
    sol = np.empty_like(y)
    sol[piv] = y
    sol /= norms
    coef = np.zeros(K + 1, dtype=complex)
    coef[0] = sol[0]
    coef[1:] = sol[1:K + 1] - 1j * sol[K + 1:]
    field = HarmonicSplitTorsion(domain, coef, s, 0.0, cond)
    check = TWO_PI * (np.arange(4 * n_fit) + 0.5) / (4 * n_fit)
    u_check = field.evaluate(domain.curve(check)[0])[0]
    u_fit = field.evaluate(x)[0]
    residual = float(max(np.abs(u_check).max(), np.abs(u_fit).max()))
    object.__setattr__(field, "boundary_residual", residual)
    return field


ADAPTIVE_DEGREES = (40, 60, 80, 120, 160, 200, 240)
ADAPTIVE_TARGET = 1e-13


def solve(domain: Domain, degree: int | None = None) -> TorsionField:
    """Closed form for ellipsoids, collocation otherwise.

    With ``degree=None`` the collocation degree is raised along
    ``ADAPTIVE_DEGREES`` until the boundary residual drops below
    ``ADAPTIVE_TARGET`` or the system becomes ill-conditioned; the field with
    the smallest residual is returned.
    """
    if isinstance(domain, Ellipsoid):
        return solve_ellipsoid(domain)
    if degree is not None:
        return solve_fourier2d(domain, degree)
    best = None
    for K in ADAPTIVE_DEGREES:
        try:
            field = solve_fourier2d(domain, K)
        except IllConditioned:
            if best is None:
                raise
            break
        if best is None or field.boundary_residual < best.boundary_residual:
            best = field
        if field.boundary_residual <= ADAPTIVE_TARGET:
            break
    return best


@dataclass(frozen=True)
class GradientBound:
    M: float
    node_index: int
    point: tuple[float, ...]


def gradient_bound(field: TorsionField, bgrid: BoundaryGrid | None = None) -> GradientBound:
    """M = max |grad u| = max of u_nu over the boundary."""
    bgrid = bgrid or boundary_grid(field.domain)
    un = field.normal_derivative(bgrid)
    j = int(np.argmax(un))
    if isinstance(field, EllipsoidTorsion):
        a = field.domain.a
        k = int(np.argmin(a))
        point = np.zeros(field.dim)
        point[k] = a[k]
        return GradientBound(2.0 * field.c / float(a[k]), j, tuple(point))

    def fun(x, nu):
        return np.sum(field.evaluate(x)[1] * nu, axis=1)

    M, point = refine_boundary_extreme(field.domain, bgrid, fun, "max")
    return GradientBound(max(M, float(un[j])), j, tuple(point))
