"""Quadrature checks of the integral identities and pointwise inequalities.

Every check returns plain data (reports or violation lists); nothing here
raises on a failed verification, so callers decide what counts as failure.
"""
from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field

import numpy as np

from . import constants
from .deviation import Deviation, rayleigh_estimate
from .errors import NonPositiveCurvature
from .geometry import (
    BoundaryGrid,
    GeometrySummary,
    Grids,
    boundary_grid,
    geometric_summary,
    radii_about,
)
from .torsion import TorsionField, gradient_bound

# Relative tolerances of the acceptance bounds.
TOL_EXACT = 1e-8  # closed-form torsion
TOL_SOLVER = 1e-6  # collocation torsion
ABS_FLOOR = 1e-10  # both sides negligible against the natural scale
REL_FLOOR = 1e-14
MAX_DOUBLED_NODES = 2_000_000
# 1/H integrands need H bounded away from zero; below this fraction of max |H|
# the boundary is treated as not (numerically) mean convex.
CURVATURE_FLOOR = 1e-6


def strictly_mean_convex(bgrid: BoundaryGrid) -> bool:
    H = bgrid.curvature
    return bool(np.all(H > CURVATURE_FLOOR * np.max(np.abs(H))))


def _tolerance(field: TorsionField) -> float:
    return TOL_EXACT if field.exact else TOL_SOLVER


@dataclass(frozen=True)
class IdentityReport:
    name: str
    lhs: float
    rhs: float
    residual: float
    relative: float
    scale: float
    tolerance: float
    passed: bool
    orders: dict = field(default_factory=dict)
    details: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return asdict(self)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, default=_json_default)


def _json_default(obj):
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, (np.floating, np.integer, np.bool_)):
        return obj.item()
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def make_report(name: str, lhs: float, rhs: float, scale: float, tolerance: float,
                orders: dict | None = None, details: dict | None = None,
                extra_ok: bool = True) -> IdentityReport:
    """Relative residual |L - R| / max(|L|, |R|, 1e-14 scale).

    The identity passes when the relative residual is within tolerance or when
    the absolute residual is below 1e-10 times the natural scale (both sides
    vanish, as on balls).
    """
    lhs, rhs, scale = float(lhs), float(rhs), abs(float(scale))
    res = abs(lhs - rhs)
    denom = max(abs(lhs), abs(rhs), REL_FLOOR * scale, 1e-300)
    rel = res / denom
    ok = (rel <= tolerance or res <= ABS_FLOOR * scale) and extra_ok
    return IdentityReport(name, lhs, rhs, res, rel, scale, tolerance, bool(ok),
                          dict(orders or {}), dict(details or {}))


# ---------------------------------------------------------------- deficits

@dataclass(frozen=True)
class DeficitReport:
    R: float
    H0: float
    serrin_l1: float  # ||u_nu - R||_1
    serrin_l2: float  # ||u_nu - R||_2
    sbt_l2: float  # ||H0 - H||_2
    sbt_pos: float  # int (H0 - H)^+
    neg_part_weighted: float  # int (H0 - H)^- u_nu^2
    hk: float | None  # int 1/H - N|Omega|, mean-convex only
    one_over_h: float | None  # int (1/H - u_nu)
    mean_convex: bool
    order: int
    kink_order: int  # order used for the positive/negative parts

    def get(self, name: str) -> float | None:
        return getattr(self, DEFICIT_FIELDS[normalize_deficit(name)])

    def to_dict(self) -> dict:
        return asdict(self)


DEFICIT_FIELDS = {
    "serrin-l2": "serrin_l2",
    "serrin-l1": "serrin_l1",
    "sbt-l2": "sbt_l2",
    "sbt-pos": "sbt_pos",
    "hk": "hk",
    "one-over-h": "one_over_h",
}
DEFICIT_PROBLEM = {
    "serrin-l2": constants.SERRIN, "serrin-l1": constants.SERRIN,
    "sbt-l2": constants.SBT, "sbt-pos": constants.SBT,
    "hk": constants.HK, "one-over-h": constants.ONE_OVER_H,
}
# Deficits measured in an L^1 sense enter with half the exponent.
DEFICIT_HALF_EXPONENT = {"serrin-l1", "sbt-pos", "hk", "one-over-h"}
_DEFICIT_ALIASES = {
    "serrinl2": "serrin-l2", "serrinl1": "serrin-l1", "sbtl2": "sbt-l2",
    "sbtpospart": "sbt-pos", "sbt-pos-part": "sbt-pos", "sbtpos": "sbt-pos",
    "oneoverh": "one-over-h", "1/h": "one-over-h",
}


def normalize_deficit(name: str) -> str:
    key = name.strip().lower().replace("_", "-")
    key = _DEFICIT_ALIASES.get(key.replace("-", ""), _DEFICIT_ALIASES.get(key, key))
    if key not in DEFICIT_FIELDS:
        raise ValueError(f"unknown deficit {name!r}; expected one of {sorted(DEFICIT_FIELDS)}")
    return key


def deficit_exponent(name: str, N: int, theta: float = constants.DEFAULT_THETA) -> float:
    """tau_N, halved for the L^1-type deficits."""
    key = normalize_deficit(name)
    t = constants.tau(N, DEFICIT_PROBLEM[key], theta)
    return t / 2.0 if key in DEFICIT_HALF_EXPONENT else t


def _boundary_data(field: TorsionField, bgrid: BoundaryGrid):
    N = field.dim
    surface = float(np.sum(bgrid.weights))
    volume = bgrid.integrate(np.sum(bgrid.nodes * bgrid.normals, axis=1)) / N
    R = N * volume / surface
    un = field.normal_derivative(bgrid)
    return R, volume, surface, un


def _kink_parts(field: TorsionField, bgrid: BoundaryGrid, H0: float):
    """(int (H0-H)^+, int (H0-H)^- u_nu^2) with one order doubling on sign change."""
    g = bgrid
    d = H0 - g.curvature
    noise = 1e-12 * abs(H0)  # round-off sign flips (balls) do not count as a kink
    if d.min() < -noise and d.max() > noise:
        factor = 2 ** (field.dim - 1)
        if g.size * factor <= MAX_DOUBLED_NODES:
            g = boundary_grid(g.domain, 2 * g.order)
    d = H0 - g.curvature
    un = field.normal_derivative(g)
    return g.integrate(np.maximum(d, 0.0)), g.integrate(np.maximum(-d, 0.0) * un**2), g.order


def deficits(field: TorsionField, bgrid: BoundaryGrid | None = None,
             summary: GeometrySummary | None = None) -> DeficitReport:
    """All deficits of the stability theorems; 1/H entries need H > 0."""
    bgrid = bgrid or boundary_grid(field.domain)
    N = field.dim
    R, volume, surface, un = _boundary_data(field, bgrid)
    H0 = 1.0 / R
    H = bgrid.curvature
    w = bgrid.weights
    pos, neg, korder = _kink_parts(field, bgrid, H0)
    mean_convex = strictly_mean_convex(bgrid)
    if summary is not None:
        mean_convex = mean_convex and summary.mean_convex
    hk = ooh = None
    if mean_convex:
        hk = float(w @ (1.0 / H)) - N * volume
        ooh = float(w @ (1.0 / H - un))
    return DeficitReport(
        R=R, H0=H0,
        serrin_l1=float(w @ np.abs(un - R)),
        serrin_l2=math.sqrt(float(w @ (un - R) ** 2)),
        sbt_l2=math.sqrt(float(w @ (H0 - H) ** 2)),
        sbt_pos=pos, neg_part_weighted=neg, hk=hk, one_over_h=ooh,
        mean_convex=mean_convex, order=bgrid.order, kink_order=korder,
    )


# ---------------------------------------------------------------- identities

def _volume_terms(field: TorsionField, dev: Deviation | None, grids: Grids):
    vg = grids.volume
    u, _, Hu = field.evaluate(vg.nodes)
    Hh = np.eye(field.dim) - Hu if dev is None else dev.evaluate(vg.nodes)[2]
    return u, Hu, np.einsum("mij,mij->m", Hh, Hh)


def verify_idwps(field: TorsionField, dev: Deviation, grids: Grids) -> IdentityReport:
    """int (-u)|hess h|^2 = 1/2 int (R^2 - u_nu^2) h_nu, plus the form in u and q."""
    N = field.dim
    bg, vg = grids.boundary, grids.volume
    R, volume, _, un = _boundary_data(field, bg)
    u, Hu, hh2 = _volume_terms(field, dev, grids)
    lhs = vg.integrate(-u * hh2)
    _, gh, _ = dev.evaluate(bg.nodes)
    hn = np.sum(gh * bg.normals, axis=1)
    rhs = 0.5 * bg.integrate((R * R - un**2) * hn)
    newton = np.einsum("mij,mij->m", Hu, Hu) - np.trace(Hu, axis1=1, axis2=2) ** 2 / N
    lhs_u = vg.integrate(-u * newton)
    qn = np.sum((bg.nodes - dev.z) * bg.normals, axis=1)
    rhs_u = 0.5 * bg.integrate((un**2 - R * R) * (un - qn))
    scale = R * R * volume
    tol = _tolerance(field)
    classical = make_report("idwps-u", lhs_u, rhs_u, scale, tol)
    return make_report("idwps", lhs, rhs, scale, tol, grids.orders,
                       {"classical_lhs": lhs_u, "classical_rhs": rhs_u,
                        "classical_relative": classical.relative},
                       extra_ok=classical.passed)


def verify_h_fundamental(field: TorsionField, dev: Deviation, grids: Grids) -> IdentityReport:
    """(1/(N-1)) int |hess h|^2 + (1/R) int (u_nu - R)^2 = int (H0 - H) u_nu^2.

    The right side is also evaluated in its split form
    -int (H0-H) h_nu u_nu + int (H0-H)(u_nu - R) q_nu, which depends on (z, a)
    only through quantities whose total is invariant.
    """
    N = field.dim
    bg, vg = grids.boundary, grids.volume
    R, volume, _, un = _boundary_data(field, bg)
    H0 = 1.0 / R
    _, _, hh2 = _volume_terms(field, dev, grids)
    lhs = vg.integrate(hh2) / (N - 1) + bg.integrate((un - R) ** 2) / R
    dH = H0 - bg.curvature
    rhs = bg.integrate(dH * un**2)
    _, gh, _ = dev.evaluate(bg.nodes)
    hn = np.sum(gh * bg.normals, axis=1)
    qn = np.sum((bg.nodes - dev.z) * bg.normals, axis=1)
    split = -bg.integrate(dH * hn * un) + bg.integrate(dH * (un - R) * qn)
    scale = N * volume
    tol = _tolerance(field)
    split_rep = make_report("h-fundamental-split", lhs, split, scale, tol)
    return make_report("h-fundamental", lhs, rhs, scale, tol, grids.orders,
                       {"split_rhs": split, "split_relative": split_rep.relative},
                       extra_ok=split_rep.passed)


def verify_hk(field: TorsionField, grids: Grids, dev: Deviation | None = None) -> IdentityReport:
    """(1/(N-1)) int |hess h|^2 + int (1 - H u_nu)^2/H = int 1/H - N|Omega|."""
    N = field.dim
    bg, vg = grids.boundary, grids.volume
    H = bg.curvature
    if not strictly_mean_convex(bg):
        raise NonPositiveCurvature(
            f"mean curvature is not bounded away from zero on the boundary "
            f"(min H = {H.min():.3g}, max H = {H.max():.3g})")
    _, volume, _, un = _boundary_data(field, bg)
    _, _, hh2 = _volume_terms(field, dev, grids)
    lhs = vg.integrate(hh2) / (N - 1) + bg.integrate((1.0 - H * un) ** 2 / H)
    rhs = bg.integrate(1.0 / H) - N * volume
    scale = N * volume
    tol = _tolerance(field)
    nonneg = bool(rhs >= -ABS_FLOOR * scale)
    return make_report("heintze-karcher", lhs, rhs, scale, tol, grids.orders,
                       {"deficit_nonnegative": nonneg}, extra_ok=nonneg)


def verify_flux(field: TorsionField, grids: Grids | BoundaryGrid,
                summary: GeometrySummary | None = None, z=None) -> tuple[IdentityReport, IdentityReport]:
    """int u_nu = N|Omega| and int H q_nu = |Gamma| (q_nu = <x - z, nu>)."""
    bg = grids.boundary if isinstance(grids, Grids) else grids
    N = field.dim
    summary = summary or geometric_summary(field.domain)
    z = np.zeros(N) if z is None else np.asarray(z, dtype=float)
    un = field.normal_derivative(bg)
    orders = grids.orders if isinstance(grids, Grids) else {"boundary": bg.order}
    tol = _tolerance(field)
    flux = make_report("flux", bg.integrate(un), N * summary.volume, N * summary.volume,
                       max(tol, TOL_EXACT) if field.exact else TOL_EXACT, orders)
    qn = np.sum((bg.nodes - z) * bg.normals, axis=1)
    mink = make_report("minkowski", bg.integrate(bg.curvature * qn), summary.surface,
                       summary.surface, TOL_EXACT, orders, {"z": z.tolist()})
    return flux, mink


def harmonic_test_function(dim: int, degree: int, index: int = 0, center=None):
    """A homogeneous harmonic polynomial from :class:`HarmonicBasis`, as a callable."""
    from .harmonic import HarmonicBasis

    basis = HarmonicBasis(dim, degree, np.zeros(dim) if center is None else np.asarray(center))
    cols = np.flatnonzero(basis.degrees == degree)
    if not 0 <= index < len(cols):
        raise ValueError(f"index must lie in [0, {len(cols)})")
    j = cols[index]

    def v(points):
        vals, grads = basis.evaluate(points)
        return vals[:, j], grads[:, j, :]

    return v


def verify_harmonic_flux(field: TorsionField, v, grids: Grids,
                         dev: Deviation | None = None) -> IdentityReport:
    """int_Gamma v^2 u_nu = N int v^2 + 2 int (-u)|grad v|^2 for harmonic v.

    ``v`` maps points to (values, gradients).  With ``v="grad-h"`` the identity
    is summed over v = d_i h, giving
    int |grad h|^2 u_nu = N int |grad h|^2 + 2 int (-u)|hess h|^2.
    """
    N = field.dim
    bg, vg = grids.boundary, grids.volume
    un = field.normal_derivative(bg)
    u = field.evaluate(vg.nodes)[0]
    if isinstance(v, str):
        if v != "grad-h" or dev is None:
            raise ValueError('v must be a callable, or "grad-h" together with a Deviation')
        gb = dev.evaluate(bg.nodes)[1]
        _, gv, Hv = dev.evaluate(vg.nodes)
        vb2 = np.sum(gb * gb, axis=1)
        vv2 = np.sum(gv * gv, axis=1)
        grad2 = np.einsum("mij,mij->m", Hv, Hv)
        name = "harmonic-flux-grad-h"
        # grad h = (x - z) - grad u cancels terms of size |x - z|, so the
        # round-off floor is set by the same integrals taken for q.
        qb2 = np.sum((bg.nodes - dev.z) ** 2, axis=1)
        qv2 = np.sum((vg.nodes - dev.z) ** 2, axis=1)
        q_scale = (bg.integrate(qb2 * np.abs(un)) + N * vg.integrate(qv2)
                   + 2.0 * N * vg.integrate(np.abs(u)))
    else:
        vb, _ = v(bg.nodes)
        vv, gv = v(vg.nodes)
        vb2, vv2, grad2 = vb**2, vv**2, np.sum(gv * gv, axis=1)
        name = "harmonic-flux"
        q_scale = 0.0
    lhs = bg.integrate(vb2 * un)
    t1 = N * vg.integrate(vv2)
    t2 = 2.0 * vg.integrate(-u * grad2)
    scale = bg.integrate(vb2 * np.abs(un)) + abs(t1) + abs(t2) + q_scale
    return make_report(name, lhs, t1 + t2, scale, _tolerance(field), grids.orders)


def verify_all(field: TorsionField, dev: Deviation, grids: Grids,
               summary: GeometrySummary | None = None) -> list[IdentityReport]:
    """Every identity applicable to the domain (HK only when H > 0)."""
    summary = summary or geometric_summary(field.domain)
    out = [verify_idwps(field, dev, grids), verify_h_fundamental(field, dev, grids)]
    if strictly_mean_convex(grids.boundary):
        out.append(verify_hk(field, grids, dev))
    out.extend(verify_flux(field, grids, summary, dev.z))
    out.append(verify_harmonic_flux(field, "grad-h", grids, dev))
    return out


# ---------------------------------------------------------------- pointwise checks

@dataclass(frozen=True)
class Violation:
    check: str
    index: int  # node index (-1 for global checks)
    lhs: float
    rhs: float

    @property
    def excess(self) -> float:
        return self.rhs - self.lhs


POINTWISE_SLACK = 1e-9


def check_pointwise(field: TorsionField, dev: Deviation | None, grids: Grids,
                    summary: GeometrySummary | None = None,
                    M: float | None = None) -> list[Violation]:
    """Nodewise inequalities; an empty list means every check passed.

    Each check is written lhs >= rhs and flagged when lhs < rhs - slack:
    Newton N|hess u|^2 >= (Delta u)^2 (volume and boundary nodes),
    -u >= (r_i/2) delta, u_nu >= r_i, the geometric bound on M >= M, and
    -u > 0 inside.
    """
    N = field.dim
    summary = summary or geometric_summary(field.domain)
    bg, vg = grids.boundary, grids.volume
    eps = POINTWISE_SLACK + 2.0 * field.boundary_residual
    out: list[Violation] = []

    def flag(name, lhs, rhs, slack):
        for j in np.flatnonzero(lhs < rhs - slack):
            out.append(Violation(name, int(j), float(lhs[j]), float(rhs[j])))

    for nodes in (vg.nodes, bg.nodes):
        _, _, Hu = field.evaluate(nodes)
        hu2 = np.einsum("mij,mij->m", Hu, Hu)
        lap = np.trace(Hu, axis1=1, axis2=2)
        flag("newton", N * hu2, lap**2, POINTWISE_SLACK * np.maximum(1.0, lap**2))
    u = field.evaluate(vg.nodes)[0]
    flag("distance", -u, 0.5 * summary.r_i * vg.distance, eps * max(1.0, summary.r_i**2))
    flag("negative-u", -u, np.zeros_like(u), 0.0 if field.exact else eps)
    un = field.normal_derivative(bg)
    flag("hopf", un, np.full_like(un, summary.r_i), eps * max(1.0, summary.r_i))
    M = M if M is not None else gradient_bound(field, bg).M
    bound = constants.gradient_bound_general(N, summary.diameter, summary.r_e)
    if bound < M - POINTWISE_SLACK * max(1.0, M):
        out.append(Violation("gradient-bound", -1, bound, M))
    return out


# ---------------------------------------------------------------- stability inequalities

@dataclass(frozen=True)
class InequalityRecord:
    name: str
    lhs: float
    rhs: float
    holds: bool
    certified: bool  # False when mu comes from the subspace estimate
    placeholder_k: bool


@dataclass(frozen=True)
class StabilityRecord:
    mu_rayleigh: float
    mu_analytic: float
    feldman: tuple[InequalityRecord, InequalityRecord]
    sbt: tuple[InequalityRecord, InequalityRecord]
    hfund: InequalityRecord
    hfund_crosscheck_residual: float  # (lhs - rhs) + (1/R) int (u_nu - R)^2
    hfund_crosscheck_passed: bool

    def to_dict(self) -> dict:
        return asdict(self)


def check_stability_inequalities(field: TorsionField, dev: Deviation, grids: Grids,
                                 summary: GeometrySummary | None = None,
                                 M: float | None = None, mu_degree: int = 4) -> StabilityRecord:
    """Both sides of the Feldman-type bound, the SBT improvement bound and the
    positive/negative-part inequality.

    mu_{2,2,1/2}(Omega, z) enters twice: from the harmonic-polynomial Rayleigh
    estimate (an upper bound on mu, so the resulting right sides are not
    certified) and from the analytic bound with the dimensionless factor set
    to 1 (certified up to that factor).
    """
    N = field.dim
    summary = summary or geometric_summary(field.domain)
    bg, vg = grids.boundary, grids.volume
    M = M if M is not None else gradient_bound(field, bg).M
    R, volume, _, un = _boundary_data(field, bg)
    H0 = 1.0 / R
    d, r_i = summary.diameter, summary.r_i
    mu_ray = rayleigh_estimate(field.domain, dev.z, 2.0, 2.0, 0.5, mu_degree, vg).mu
    delta_z = radii_about(field.domain, dev.z, bg)[0]
    mu_inv = constants.mu_inverse_bounds(N, 2.0, 2.0, 0.5, d, r_i, delta_z, volume)
    mu_an = 1.0 / mu_inv["hs_mu_c2"]

    _, gh, _ = dev.evaluate(bg.nodes)
    hn = np.sum(gh * bg.normals, axis=1)
    hn_l2 = math.sqrt(bg.integrate(hn**2))
    dev_l2 = math.sqrt(bg.integrate((un - R) ** 2))
    dH = H0 - bg.curvature
    sbt_l2 = math.sqrt(bg.integrate(dH**2))
    scale = N * volume
    slack = 1e-9 * max(1.0, scale)

    def ineq(name, lhs, rhs, certified, placeholder):
        return InequalityRecord(name, float(lhs), float(rhs), bool(lhs <= rhs + slack),
                                certified, placeholder)

    feld = tuple(
        ineq("feldman", hn_l2, constants.feldman_factor(N, M, R, r_i, mu) * dev_l2, cert, ph)
        for mu, cert, ph in ((mu_ray, False, False), (mu_an, True, True)))
    sbt = tuple(
        ineq("sbt-improvement", dev_l2,
             constants.sbt_factor(N, M, R, r_i, d, mu) * sbt_l2, cert, ph)
        for mu, cert, ph in ((mu_ray, False, False), (mu_an, True, True)))
    _, _, hh2 = _volume_terms(field, dev, grids)
    hess_term = vg.integrate(hh2) / (N - 1)
    neg = bg.integrate(np.maximum(-dH, 0.0) * un**2)
    pos = bg.integrate(np.maximum(dH, 0.0) * un**2)
    hf = ineq("positive-part", hess_term + neg, pos, True, False)
    cross = (hf.lhs - hf.rhs) + bg.integrate((un - R) ** 2) / R
    tol = _tolerance(field)
    cross_ok = abs(cross) <= tol * max(abs(hf.lhs), abs(hf.rhs)) or abs(cross) <= ABS_FLOOR * scale
    return StabilityRecord(mu_ray, mu_an, feld, sbt, hf, float(cross), bool(cross_ok))
