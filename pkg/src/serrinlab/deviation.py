"""The harmonic deviation h = q - u, q(x) = (|x - z|^2 - a)/2.

Also home of the center strategies, the oscillation of h on the boundary,
the norms of h that drive the stability estimates, the L^p oscillation
lemma check and a subspace estimate of the Hardy-Poincare constants.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import linalg, optimize

from . import constants
from .errors import (
    CenterLeftDomain,
    CenterOutsideDomain,
    ConditionViolated,
    NoConvergence,
)
from .geometry import (
    BoundaryGrid,
    Domain,
    Ellipsoid,
    GeometrySummary,
    VolumeGrid,
    boundary_grid,
    geometric_summary,
    radii_about,
    refine_boundary_extreme,
    volume_grid,
)
from .harmonic import HarmonicBasis
from .torsion import TorsionField, gradient_bound


# ---------------------------------------------------------------- centers

@dataclass(frozen=True)
class CenterStrategy:
    """``kind`` is one of ``argmin``, ``centroid``, ``feldman``; ``x0`` feeds Feldman."""

    kind: str = "argmin"
    x0: tuple[float, ...] | None = None

    def __post_init__(self):
        kind = self.kind.lower().replace("_", "-")
        kind = {"argminu": "argmin", "argmin-u": "argmin"}.get(kind, kind)
        if kind not in ("argmin", "centroid", "feldman"):
            raise ValueError(f"unknown center strategy {self.kind!r}")
        if kind == "feldman" and self.x0 is None:
            raise ValueError("the Feldman strategy needs a point x0")
        object.__setattr__(self, "kind", kind)

    @classmethod
    def parse(cls, text: str) -> "CenterStrategy":
        """``argmin``, ``centroid`` or ``feldman:x1,x2,...``."""
        if ":" in text:
            kind, rest = text.split(":", 1)
            return cls(kind, tuple(float(s) for s in rest.split(",")))
        return cls(text)

    def __str__(self) -> str:
        if self.kind == "feldman":
            return "feldman:" + ",".join(repr(float(c)) for c in self.x0)
        return self.kind


def centroid(vgrid: VolumeGrid) -> np.ndarray:
    return vgrid.weights @ vgrid.nodes / np.sum(vgrid.weights)


def _newton_min(field: TorsionField, z0: np.ndarray, tol: float, maxiter: int = 60):
    domain = field.domain
    z = z0.copy()
    u, g, H = field.evaluate(z[None, :])
    u, g, H = u[0], g[0], H[0]
    for _ in range(maxiter):
        if np.linalg.norm(g) <= tol:
            return z
        try:
            step = -linalg.solve(H, g, assume_a="sym")
        except linalg.LinAlgError:
            step = -g
        if step @ g >= 0:  # not a descent direction
            step = -g
        t = 1.0
        while t > 1e-12:
            zn = z + t * step
            if bool(domain.contains(zn[None, :])[0]):
                un, gn, Hn = field.evaluate(zn[None, :])
                if un[0] <= u + 1e-4 * t * (step @ g):
                    break
                # near the minimum the decrease of u drops below its round-off;
                # accept steps that shrink the gradient without raising u visibly
                if (np.linalg.norm(gn[0]) < 0.5 * np.linalg.norm(g)
                        and un[0] <= u + 8 * np.finfo(float).eps * max(abs(u), 1.0)):
                    break
            t *= 0.5
        else:
            return None
        z, u, g, H = zn, un[0], gn[0], Hn[0]
    return z if np.linalg.norm(g) <= tol else None


def select_center(field: TorsionField, strategy: CenterStrategy | str = "argmin",
                  vgrid: VolumeGrid | None = None) -> np.ndarray:
    """Center z for the quadratic q.

    ``argmin``: damped Newton on grad u from the centroid, with a restart from
    the best volume node if that fails.  ``centroid``: quadrature center of
    mass.  ``feldman``: z = x0 - grad u(x0).
    """
    if isinstance(strategy, str):
        strategy = CenterStrategy.parse(strategy)
    domain = field.domain
    if isinstance(domain, Ellipsoid) and strategy.kind in ("argmin", "centroid"):
        return np.zeros(domain.dim)
    if strategy.kind == "feldman":
        _, g, _ = field.eval(np.asarray(strategy.x0, dtype=float))
        z = np.asarray(strategy.x0, dtype=float) - g
        if not bool(domain.contains(z[None, :])[0]):
            raise CenterLeftDomain(f"Feldman center {z.tolist()} lies outside the domain")
        return z
    vgrid = vgrid or volume_grid(domain)
    c = centroid(vgrid)
    if strategy.kind == "centroid":
        if not bool(domain.contains(c[None, :])[0]):
            raise CenterLeftDomain(f"centroid {c.tolist()} lies outside the domain")
        return c
    M = gradient_bound(field).M
    tol = 1e-12 * M
    seeds = [c] if bool(domain.contains(c[None, :])[0]) else []
    u_nodes = field.evaluate(vgrid.nodes)[0]
    seeds.append(vgrid.nodes[int(np.argmin(u_nodes))])
    for seed in seeds:
        z = _newton_min(field, np.asarray(seed, dtype=float), tol)
        if z is not None:
            return z
    raise NoConvergence("Newton iteration for the minimum point of u did not converge")


# ---------------------------------------------------------------- deviation

@dataclass(frozen=True, eq=False)
class Deviation:
    field: TorsionField
    z: np.ndarray
    a: float = 0.0

    @property
    def dim(self) -> int:
        return self.field.dim

    @property
    def domain(self) -> Domain:
        return self.field.domain

    def q(self, points):
        x = np.atleast_2d(np.asarray(points, dtype=float)) - self.z
        return 0.5 * (np.einsum("ij,ij->i", x, x) - self.a), x

    def evaluate(self, points):
        """(h, grad h, hess h) at an (m, N) array."""
        u, gu, Hu = self.field.evaluate(points)
        qv, gq = self.q(points)
        if len(Hu) and Hu.strides[0] == 0:  # constant Hessian (ellipsoids): stay a view
            return qv - u, gq - gu, np.broadcast_to(np.eye(self.dim) - Hu[0], Hu.shape)
        return qv - u, gq - gu, np.eye(self.dim) - Hu


def deviation_field(field: TorsionField, z, a: float = 0.0) -> Deviation:
    z = np.asarray(z, dtype=float).reshape(-1)
    if z.shape[0] != field.dim:
        raise ValueError(f"center has dimension {z.shape[0]}, field has {field.dim}")
    if not bool(field.domain.contains(z[None, :])[0]):
        raise CenterOutsideDomain(f"z = {z.tolist()} is not inside the domain")
    z.setflags(write=False)
    return Deviation(field, z, float(a))


# ---------------------------------------------------------------- oscillation

@dataclass(frozen=True)
class OscillationRecord:
    osc: float  # refined max - min of h over the boundary
    osc_grid: float  # same, over grid nodes only
    rho_i: float
    rho_e: float
    identity_value: float  # (rho_e^2 - rho_i^2)/2
    identity_residual: float
    tolerance: float
    identity_holds: bool
    lower_bound: float | None  # (r_i/2)(rho_e - rho_i)
    lower_bound_holds: bool | None

    @property
    def gap(self) -> float:
        return self.rho_e - self.rho_i


def boundary_oscillation(dev: Deviation, bgrid: BoundaryGrid | None = None,
                         r_i: float | None = None) -> OscillationRecord:
    """Oscillation of h over the boundary, checked against (rho_e^2 - rho_i^2)/2.

    On the boundary h = q, so the oscillation is a pure geometric quantity; the
    tolerance allows for the solver's boundary residual.
    """
    domain = dev.domain
    bgrid = bgrid or boundary_grid(domain)
    hb = dev.evaluate(bgrid.nodes)[0]

    def hfun(x, nu):
        return dev.evaluate(x)[0]

    hmax, _ = refine_boundary_extreme(domain, bgrid, hfun, "max")
    hmin, _ = refine_boundary_extreme(domain, bgrid, hfun, "min")
    osc = hmax - hmin
    rho_i, rho_e = radii_about(domain, dev.z, bgrid)
    ident = 0.5 * (rho_e**2 - rho_i**2)
    tol = 1e-9 * max(rho_e**2, 1e-300) + 2.0 * dev.field.boundary_residual
    resid = abs(osc - ident)
    lower = holds = None
    if r_i is not None:
        lower = 0.5 * r_i * (rho_e - rho_i)
        holds = bool(osc >= lower - tol)
    return OscillationRecord(osc, float(hb.max() - hb.min()), rho_i, rho_e, ident, resid,
                             tol, bool(resid <= tol), lower, holds)


# ---------------------------------------------------------------- norms

def r_mean(values, weights, r: float) -> float:
    """Minimizer over lambda of sum w |v - lambda|^r (the r-mean)."""
    v = np.asarray(values, dtype=float).ravel()
    w = np.asarray(weights, dtype=float).ravel()
    if r < 1:
        raise ValueError(f"r must be >= 1, got {r}")
    if v.shape != w.shape or np.any(w <= 0):
        raise ValueError("weights must be positive and match the values")
    if r == 2:
        return float(w @ v / w.sum())
    lo, hi = float(v.min()), float(v.max())
    if lo == hi:
        return lo

    def slope(lam):  # derivative of the convex objective (a subgradient for r = 1)
        d = v - lam
        if r == 1:
            return -float(w @ np.sign(d))
        return -r * float(w @ (np.sign(d) * np.abs(d) ** (r - 1)))

    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if mid in (lo, hi):
            break
        s = slope(mid)
        if s > 0:
            hi = mid
        elif s < 0:
            lo = mid
        else:
            return mid
    if r == 1:  # the median set may be an interval; pick a data point inside it
        cand = v[(v >= lo - 1e-15 * abs(lo)) & (v <= hi + 1e-15 * abs(hi))]
        if cand.size:
            return float(cand.min())
    return 0.5 * (lo + hi)


def lp_norm(values, weights, p: float) -> float:
    v = np.abs(np.asarray(values, dtype=float))
    if math.isinf(p):
        return float(v.max())
    return float(np.dot(weights, v**p)) ** (1.0 / p)


@dataclass(frozen=True)
class NormReport:
    p: float
    h_mean: float
    h_dev_p: float  # ||h - h_Omega||_p
    hess_l2: float  # ||hess h||_2
    weighted_hess_l2: float  # ||delta^{1/2} hess h||_2
    torsion_weighted: float  # int (-u) |hess h|^2
    oscillation: float


def norms(dev: Deviation, vgrid: VolumeGrid, bgrid: BoundaryGrid, p: float = 2.0) -> NormReport:
    if p < 1:
        raise ValueError(f"p must be >= 1, got {p}")
    h, _, Hh = dev.evaluate(vgrid.nodes)
    u = dev.field.evaluate(vgrid.nodes)[0]
    w = vgrid.weights
    mean = float(w @ h / w.sum())
    hess2 = np.einsum("mij,mij->m", Hh, Hh)
    osc = boundary_oscillation(dev, bgrid).osc
    return NormReport(
        p=p,
        h_mean=mean,
        h_dev_p=lp_norm(h - mean, w, p),
        hess_l2=math.sqrt(max(float(w @ hess2), 0.0)),
        weighted_hess_l2=math.sqrt(max(float(w @ (vgrid.distance * hess2)), 0.0)),
        torsion_weighted=float(w @ (-u * hess2)),
        oscillation=osc,
    )


# ---------------------------------------------------------------- oscillation lemma

@dataclass(frozen=True)
class OscillationBoundRecord:
    N: int
    p: float
    G: float  # refined max of |grad h| on the boundary
    G_analytic: float  # M + d
    a_Np: float
    alpha_Np: float
    h_dev_p: float
    smallness_lhs: float
    smallness_rhs: float
    smallness_holds: bool
    osc: float
    osc_bound: float
    osc_bound_holds: bool | None  # None when the smallness condition fails
    gap: float
    gap_constant: float
    gap_bound: float
    gap_bound_holds: bool


def oscillation_bound_check(dev: Deviation, vgrid: VolumeGrid, bgrid: BoundaryGrid,
                            p: float = 2.0, G: float | None = None,
                            summary: GeometrySummary | None = None,
                            M: float | None = None) -> OscillationBoundRecord:
    """Both sides of the L^p oscillation lemma and its specialization to h."""
    N = dev.dim
    summary = summary or geometric_summary(dev.domain)
    M = M if M is not None else gradient_bound(dev.field, bgrid).M

    def gnorm(x, nu):
        return np.linalg.norm(dev.evaluate(x)[1], axis=1)

    G_ref, _ = refine_boundary_extreme(dev.domain, bgrid, gnorm, "max")
    G = max(G_ref, float(gnorm(bgrid.nodes, None).max())) if G is None else G
    a, alpha = constants.oscillation_constants(N, p)
    h = dev.evaluate(vgrid.nodes)[0]
    w = vgrid.weights
    hdev = lp_norm(h - w @ h / w.sum(), w, p)
    osc_rec = boundary_oscillation(dev, bgrid, summary.r_i)
    small_rhs = alpha * summary.r_i ** ((N + p) / p) * G
    small = bool(hdev <= small_rhs)
    osc_bound = a * G ** (N / (N + p)) * hdev ** (p / (N + p))
    tol = osc_rec.tolerance
    osc_ok = bool(osc_rec.osc <= osc_bound + tol) if small else None
    C = constants.lemma_oscillation_constant(N, p, summary.diameter, summary.r_i, M)
    gap_bound = C * hdev ** (p / (N + p))
    gap = osc_rec.gap
    return OscillationBoundRecord(
        N=N, p=p, G=G, G_analytic=M + summary.diameter, a_Np=a, alpha_Np=alpha,
        h_dev_p=hdev, smallness_lhs=hdev, smallness_rhs=small_rhs, smallness_holds=small,
        osc=osc_rec.osc, osc_bound=osc_bound, osc_bound_holds=osc_ok,
        gap=gap, gap_constant=C, gap_bound=gap_bound,
        gap_bound_holds=bool(gap <= gap_bound + tol),
    )


# ---------------------------------------------------------------- Hardy-Poincare

def check_condition(N: int, r: float, p: float, alpha: float) -> str:
    """Which admissibility condition (``hs`` or ``bs``) the triple satisfies."""
    if constants.hs_condition(N, r, p, alpha):
        return "hs"
    if constants.bs_condition(r, p, alpha):
        return "bs"
    raise ConditionViolated(
        f"(r, p, alpha) = ({r}, {p}, {alpha}) satisfies neither 1 <= p <= r <= "
        f"Np/(N - p(1-alpha)) with p(1-alpha) < N, nor r = p, alpha = 0 (N = {N})")


@dataclass(frozen=True)
class RayleighEstimate:
    """Subspace minimum of ||delta^alpha grad v||_p / ||v||_r.

    Restricting to polynomials can only raise the minimum, so ``mu`` is an
    UPPER bound on the true constant and is never used to certify anything.
    """

    mu: float
    r: float
    p: float
    alpha: float
    barred: bool
    degree: int
    condition: str
    coefficients: np.ndarray = field(repr=False)
    upper_bound: bool = True
    certified: bool = False


def _ratio_parts(vals, grads, weights, dist, r, p, alpha):
    wd = dist ** (alpha * p)

    def ratio(c):
        v = vals @ c
        g = np.einsum("mni,n->mi", grads, c)
        num = float(np.sum(weights[:, None] * wd[:, None] * np.abs(g) ** p)) ** (1.0 / p)
        den = float(weights @ np.abs(v) ** r) ** (1.0 / r)
        return num / den

    return ratio


def rayleigh_estimate(domain: Domain, z=None, r: float = 2.0, p: float = 2.0,
                      alpha: float = 0.0, degree: int = 4, vgrid: VolumeGrid | None = None,
                      barred: bool = False, rotation=None) -> RayleighEstimate:
    """Minimize ||delta^alpha grad v||_p / ||v||_r over harmonic polynomials.

    ``barred=False`` uses v(z) = 0 (the basis has no constant term); ``barred=True``
    subtracts volume means instead.  The gradient norm is taken componentwise,
    (sum_i ||delta^alpha d_i v||_p^p)^{1/p}.  For r = p = 2 the minimum is a
    generalized eigenvalue; otherwise BFGS from the eigenvector.
    """
    N = domain.dim
    cond = check_condition(N, r, p, alpha)
    if degree < 1:
        raise ValueError("basis degree must be >= 1")
    vgrid = vgrid or volume_grid(domain)
    z = np.zeros(N) if z is None else np.asarray(z, dtype=float)
    scale = float(np.max(np.linalg.norm(vgrid.nodes - z, axis=1)))
    basis = HarmonicBasis(N, degree, z, scale, rotation)
    vals, grads = basis.evaluate(vgrid.nodes)
    w = vgrid.weights
    if barred:
        vals = vals - (w @ vals) / w.sum()
    dist = np.maximum(vgrid.distance, 0.0)
    wd2 = w * dist ** (2 * alpha)
    A = np.einsum("m,mni,mki->nk", wd2, grads, grads)
    B = vals.T @ (w[:, None] * vals)
    evals, evecs = linalg.eigh(A, B)
    c0 = evecs[:, 0]
    if r == 2 and p == 2:
        mu, c = math.sqrt(max(evals[0], 0.0)), c0
    else:
        ratio = _ratio_parts(vals, grads, w, dist, r, p, alpha)
        res = optimize.minimize(ratio, c0, method="BFGS", options={"gtol": 1e-10})
        mu, c = min((ratio(c0), c0), (float(res.fun), res.x), key=lambda t: t[0])
    return RayleighEstimate(mu=float(mu), r=r, p=p, alpha=alpha, barred=barred,
                            degree=degree, condition=cond, coefficients=np.asarray(c))
