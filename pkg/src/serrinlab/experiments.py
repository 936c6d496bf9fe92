"""Family sweeps and empirical stability exponents.

A family is a one-parameter deformation of the unit ball.  For each epsilon
the pipeline solves the torsion problem, picks the center, measures the gap
rho_e - rho_i and a chosen deficit, verifies the identities and keeps the row
for the log-log fit only when the identities hold and the deficit is well
above the quadrature noise.
"""
from __future__ import annotations

import csv
import io
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy import stats

from . import constants
from .deviation import (
    CenterStrategy,
    boundary_oscillation,
    deviation_field,
    oscillation_bound_check,
    select_center,
)
from .errors import SerrinLabError, TooFewPoints
from .geometry import Domain, Ellipsoid, Fourier2D, build_domain, geometric_summary, make_grids
from .identities import (
    ABS_FLOOR,
    DEFICIT_FIELDS,
    check_pointwise,
    check_stability_inequalities,
    deficit_exponent,
    deficits,
    normalize_deficit,
    verify_all,
)
from .torsion import gradient_bound, solve

# Example domains shipped with the package (``serrinlab describe --domain <json>``).
BUNDLED_DOMAINS: dict[str, dict] = {
    "disk": {"kind": "ellipsoid", "axes": [1.0, 1.0]},
    "ball3": {"kind": "ellipsoid", "axes": [1.0, 1.0, 1.0]},
    "ball5": {"kind": "ellipsoid", "axes": [1.0] * 5},
    "ellipse-2-1": {"kind": "ellipsoid", "axes": [2.0, 1.0]},
    "ellipse-1.2": {"kind": "ellipsoid", "axes": [1.2, 1 / 1.2]},
    "ellipse-1.5-1": {"kind": "ellipsoid", "axes": [1.5, 1.0]},
    "ellipsoid3": {"kind": "ellipsoid", "axes": [2.0, 1.0, 1.5]},
    "ellipsoid4": {"kind": "ellipsoid", "axes": [2.0, 1.0, 1.5, 1.2]},
    "ellipsoid5": {"kind": "ellipsoid", "axes": [2.0, 1.0, 1.5, 1.2, 1.7]},
    "fourier-disk": {"kind": "fourier2d", "cos": [1.0]},
    "fourier-c2": {"kind": "fourier2d", "cos": [1.0, 0.0, 0.05]},
    "fourier-c3": {"kind": "fourier2d", "cos": [1.0, 0.0, 0.0, 0.08]},
    "fourier-c4": {"kind": "fourier2d", "cos": [1.0, 0.0, 0.0, 0.0, 0.05]},
    "fourier-mixed": {"kind": "fourier2d", "cos": [1.0, 0.03, 0.04], "sin": [0.02, 0.0, 0.02]},
    "fourier-star": {"kind": "fourier2d", "cos": [1.0, 0.0, 0.0, 0.0, 0.1]},
}

CSV_VERSION = "serrinlab-fit-csv v1"
ROW_RESIDUAL_LIMIT = 1e-5
_EPS = float(np.finfo(float).eps)
NOISE_FACTOR = 10.0
MIN_ROWS = 4


@dataclass(frozen=True)
class FamilySpec:
    """``kind`` is ``ellipsoid`` (volume-normalized eccentric ellipsoids) or
    ``fourier`` (disk perturbed by ``eps * cos(mode * theta)``)."""

    kind: str = "ellipsoid"
    N: int = 2
    eps: tuple[float, ...] = (1e-1, 3e-2, 1e-2, 3e-3, 1e-3)
    base_radius: float = 1.0
    mode: int = 2
    center: str = "argmin"
    deficit: str = "serrin-l2"
    boundary_order: int | None = None
    radial_order: int | None = None
    angular_order: int | None = None
    degree: int | None = None
    theta: float = constants.DEFAULT_THETA

    def __post_init__(self):
        kind = {"ellipse2d": "ellipsoid", "ellipse": "ellipsoid"}.get(self.kind.lower(),
                                                                      self.kind.lower())
        if kind not in ("ellipsoid", "fourier"):
            raise ValueError(f"unknown family kind {self.kind!r}")
        object.__setattr__(self, "kind", kind)
        object.__setattr__(self, "eps", tuple(float(e) for e in self.eps))
        object.__setattr__(self, "deficit", normalize_deficit(self.deficit))
        if any(e <= 0 for e in self.eps):
            raise ValueError("epsilon values must be positive")
        if any(a <= b for a, b in zip(self.eps, self.eps[1:])):
            raise ValueError("epsilon values must be strictly decreasing")
        if self.base_radius <= 0:
            raise ValueError("base radius must be positive")
        if kind == "fourier" and self.N != 2:
            raise ValueError("Fourier families live in the plane (N = 2)")
        if self.N < 2:
            raise ValueError("N must be >= 2")
        CenterStrategy.parse(self.center)

    def domain(self, eps: float) -> Domain:
        rho = self.base_radius
        if self.kind == "ellipsoid":
            other = rho * (1.0 + eps) ** (-1.0 / (self.N - 1))
            return Ellipsoid((rho * (1.0 + eps),) + (other,) * (self.N - 1))
        cos = [0.0] * (self.mode + 1)
        cos[0] = rho
        cos[self.mode] = rho * eps
        return Fourier2D(tuple(cos), ())

    def shape_columns(self) -> list[str]:
        if self.kind == "ellipsoid":
            return [f"a_{i + 1}" for i in range(self.N)]
        return ["c_0", f"c_{self.mode}"]

    def shape_values(self, eps: float) -> list[float]:
        d = self.domain(eps)
        if isinstance(d, Ellipsoid):
            return [float(a) for a in d.axes]
        return [d.cos[0], d.cos[self.mode]]


@dataclass(frozen=True)
class FamilyRow:
    eps: float
    shape: tuple[float, ...]
    deficit: float | None
    gap: float | None
    residuals: dict  # identity name -> relative residual
    max_abs_residual: float | None
    status: str  # ok | excluded-residual | noise-floor | solver-failure: ...
    all_deficits: dict = field(default_factory=dict)

    @property
    def usable(self) -> bool:
        return self.status == "ok"


@dataclass(frozen=True)
class ExponentFit:
    deficit: str
    N: int
    tau: float
    rows: tuple[FamilyRow, ...]
    slope: float
    intercept: float
    r2: float
    used: int
    excluded: tuple[tuple[float, str], ...]

    def to_dict(self) -> dict:
        return asdict(self)


def fit_power_law(deficit, gap) -> tuple[float, float, float]:
    """OLS of log(gap) on log(deficit): (slope, intercept, R^2)."""
    x = np.log(np.asarray(deficit, dtype=float))
    y = np.log(np.asarray(gap, dtype=float))
    if len(x) < 2:
        raise TooFewPoints("need at least two points for a fit")
    res = stats.linregress(x, y)
    return float(res.slope), float(res.intercept), float(res.rvalue**2)


def _run_row(spec: FamilySpec, eps: float) -> FamilyRow:
    shape = tuple(spec.shape_values(eps))
    try:
        dom = spec.domain(eps)
        fld = solve(dom, spec.degree)
        grids = make_grids(dom, spec.boundary_order, spec.radial_order, spec.angular_order)
        summary = geometric_summary(dom, spec.boundary_order)
        z = select_center(fld, spec.center, grids.volume)
        dev = deviation_field(fld, z)
        reports = verify_all(fld, dev, grids, summary)
        dr = deficits(fld, grids.boundary, summary)
        osc = boundary_oscillation(dev, grids.boundary)
    except SerrinLabError as exc:
        return FamilyRow(eps, shape, None, None, {}, None,
                         f"solver-failure: {type(exc).__name__}: {exc}")
    resid = {r.name: r.relative for r in reports}
    max_abs = max(r.residual for r in reports)
    value = dr.get(spec.deficit)
    all_def = {k: dr.get(k) for k in DEFICIT_FIELDS}
    if value is None:
        status = "solver-failure: deficit undefined (boundary not mean convex)"
    elif any(r.relative > ROW_RESIDUAL_LIMIT and r.residual > ABS_FLOOR * r.scale
             for r in reports):
        status = "excluded-residual"
    elif (not value > NOISE_FACTOR * (max_abs + _EPS * dr.R * max(summary.surface, 1.0))
          or osc.gap <= NOISE_FACTOR * _EPS * summary.diameter ** 2):
        status = "noise-floor"
    else:
        status = "ok"
    return FamilyRow(eps, shape, value, osc.gap, resid, max_abs, status, all_def)


def _run_row_star(args):
    return _run_row(*args)


def default_jobs() -> int:
    try:
        return max(1, len(os.sched_getaffinity(0)))
    except AttributeError:  # pragma: no cover - non-Linux
        return os.cpu_count() or 1


def run_family(spec: FamilySpec, jobs: int = 1) -> ExponentFit:
    """Sweep the family and fit log(gap) against log(deficit).

    Rows are computed independently (in a process pool when ``jobs > 1``) and
    ordered by decreasing epsilon before fitting, so the result does not
    depend on scheduling.
    """
    work = [(spec, e) for e in spec.eps]
    if jobs > 1 and len(work) > 1:
        with ProcessPoolExecutor(max_workers=min(jobs, len(work))) as pool:
            rows = list(pool.map(_run_row_star, work))
    else:
        rows = [_run_row(*w) for w in work]
    rows.sort(key=lambda r: -r.eps)
    good = [r for r in rows if r.usable]
    excluded = tuple((r.eps, r.status) for r in rows if not r.usable)
    tau = deficit_exponent(spec.deficit, spec.N, spec.theta)
    if len(good) < MIN_ROWS:
        raise TooFewPoints(f"only {len(good)} usable rows (need {MIN_ROWS}); "
                           f"excluded: {list(excluded)}")
    slope, intercept, r2 = fit_power_law([r.deficit for r in good], [r.gap for r in good])
    return ExponentFit(spec.deficit, spec.N, tau, tuple(rows), slope, intercept, r2,
                       len(good), excluded)


def _fmt(x) -> str:
    if x is None:
        return ""
    if isinstance(x, float):
        return format(x, ".17g")
    return str(x)


def fit_to_csv(spec: FamilySpec, fit: ExponentFit) -> str:
    """One row per epsilon, preceded by a version line and a fixed header."""
    buf = io.StringIO()
    buf.write(f"# {CSV_VERSION}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["epsilon", *spec.shape_columns(), "deficit_name", "deficit", "gap",
                "log_deficit", "log_gap", "residual_idwps", "residual_hfund",
                "residual_hk", "status"])
    for r in fit.rows:
        logs = ["", ""]
        if r.deficit and r.gap and r.deficit > 0 and r.gap > 0:
            logs = [math.log(r.deficit), math.log(r.gap)]
        w.writerow([_fmt(r.eps), *[_fmt(s) for s in r.shape], fit.deficit, _fmt(r.deficit),
                    _fmt(r.gap), *[_fmt(v) for v in logs],
                    _fmt(r.residuals.get("idwps")), _fmt(r.residuals.get("h-fundamental")),
                    _fmt(r.residuals.get("heintze-karcher")), r.status])
    buf.write(f"# slope={_fmt(fit.slope)} intercept={_fmt(fit.intercept)} "
              f"r2={_fmt(fit.r2)} used={fit.used} tau={_fmt(fit.tau)}\n")
    return buf.getvalue()


# ---------------------------------------------------------------- single-domain report

GAP_FLOOR = 1e-10


def stability_report(domain_spec, center: str = "argmin", boundary_order: int | None = None,
                     radial_order: int | None = None, angular_order: int | None = None,
                     degree: int | None = None, p: float = 2.0,
                     theta: float = constants.DEFAULT_THETA) -> dict:
    """Gap, deficits, implied-constant ratios, residuals, checks and constants."""
    dom = domain_spec if isinstance(domain_spec, Domain) else build_domain(domain_spec)
    N = dom.dim
    fld = solve(dom, degree)
    grids = make_grids(dom, boundary_order, radial_order, angular_order)
    summary = geometric_summary(dom, boundary_order)
    z = select_center(fld, center, grids.volume)
    dev = deviation_field(fld, z)
    M = gradient_bound(fld, grids.boundary).M
    reports = verify_all(fld, dev, grids, summary)
    dr = deficits(fld, grids.boundary, summary)
    osc = boundary_oscillation(dev, grids.boundary, summary.r_i)
    ratios = {}
    for name in DEFICIT_FIELDS:
        value = dr.get(name)
        t = deficit_exponent(name, N, theta)
        if value is None or value <= GAP_FLOOR or osc.gap <= GAP_FLOOR:
            ratios[name] = None  # not applicable
        else:
            ratios[name] = osc.gap / value**t
    led = constants.ledger(summary, N, p, osc.rho_i, M, theta=theta)
    return {
        "domain": dom.to_dict(),
        "summary": asdict(summary),
        "center": [float(c) for c in z],
        "boundary_residual": fld.boundary_residual,
        "M": M,
        "rho_i": osc.rho_i,
        "rho_e": osc.rho_e,
        "gap": osc.gap,
        "oscillation": asdict(osc),
        "deficits": dr.to_dict(),
        "tau": {name: deficit_exponent(name, N, theta) for name in DEFICIT_FIELDS},
        "ratios": ratios,
        "identities": [r.to_dict() for r in reports],
        "pointwise_violations": [asdict(v) for v in check_pointwise(fld, dev, grids, summary, M)],
        "stability": check_stability_inequalities(fld, dev, grids, summary, M).to_dict(),
        "oscillation_lemma": asdict(oscillation_bound_check(dev, grids.volume, grids.boundary,
                                                            p, summary=summary, M=M)),
        "constants": asdict(led),
    }


def random_convex_fourier(rng: np.random.Generator, max_mode: int = 4,
                          strength: tuple[float, float] = (0.1, 0.6)) -> Fourier2D:
    """Random convex perturbation of the unit disk.

    Coefficients are drawn with sum k^2 (|c_k| + |s_k|) < 0.6, which keeps the
    curvature positive; convexity is re-checked and the draw repeated if needed.
    """
    while True:
        K = int(rng.integers(1, max_mode + 1))
        raw = rng.standard_normal((2, K))
        k2 = np.arange(1, K + 1) ** 2
        s = rng.uniform(*strength) / float(np.sum(k2 * np.abs(raw).sum(axis=0)))
        d = Fourier2D((1.0, *(raw[0] * s)), tuple(raw[1] * s))
        if geometric_summary(d).convex:
            return d
