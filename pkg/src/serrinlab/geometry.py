"""Star-shaped domains, boundary and volume quadrature, geometric summaries.

Two domain families are supported:

* ``Ellipsoid`` with semi-axes ``a_1 .. a_N`` (any ``N >= 2``),
* ``Fourier2D`` whose boundary is ``r = R(theta)`` with ``R`` a finite
  trigonometric polynomial.

Plane curves are integrated with the periodic trapezoidal rule in the curve
parameter (spectrally accurate).  Ellipsoids with ``N >= 3`` use the map
``omega -> A omega`` of a tensor rule on the unit sphere: Gauss-Jacobi in the
cosine of every polar angle and equispaced nodes in the azimuth.  Volume rules
are the polar tensor product ``x = r * boundary_point`` with Gauss-Legendre in
``r``.

Curvature convention: ``H`` is the mean of the principal curvatures taken
with respect to the inner normal, so a ball of radius ``rho`` has ``H = 1/rho``.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass
from functools import cached_property
from pathlib import Path
from typing import Callable

import numpy as np
from scipy import optimize, special
from scipy.spatial import cKDTree

from .errors import (
    CenterOutsideDomain,
    DomainError,
    NonPositiveAxis,
    NonPositiveRadius,
    ProjectionDiverged,
    UnsupportedDimension,
)

TWO_PI = 2.0 * math.pi

# Per-dimension defaults.  The tensor sphere rule has order**(N-1)/2**(N-2)
# nodes, so the order has to come down as N grows.
_BOUNDARY_ORDER = {2: 256, 3: 64, 4: 44, 5: 36}
_RADIAL_ORDER = {2: 64, 3: 16, 4: 10, 5: 8}
_VOLUME_ANGULAR_ORDER = {2: 256, 3: 32, 4: 16, 5: 12}


def default_boundary_order(dim: int) -> int:
    return _BOUNDARY_ORDER.get(dim, 16)


def default_radial_order(dim: int) -> int:
    return _RADIAL_ORDER.get(dim, 8)


def default_volume_angular_order(dim: int) -> int:
    return _VOLUME_ANGULAR_ORDER.get(dim, 12)


def unit_ball_volume(dim: int) -> float:
    """|B|, the volume of the unit ball in R^dim."""
    return math.pi ** (dim / 2) / math.gamma(dim / 2 + 1)


def unit_sphere_area(dim: int) -> float:
    """Surface measure of the unit sphere S^(dim-1) in R^dim."""
    return 2.0 * math.pi ** (dim / 2) / math.gamma(dim / 2)


def _readonly(*arrays: np.ndarray) -> None:
    for a in arrays:
        a.setflags(write=False)


# ---------------------------------------------------------------- domains


class Domain:
    """Common surface of the two domain families."""

    dim: int
    kind: str

    def contains(self, points, tol: float = 0.0) -> np.ndarray:
        raise NotImplementedError

    def to_dict(self) -> dict:
        raise NotImplementedError

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    # plane-curve interface, used for every N == 2 domain
    def curve(self, t):
        raise NotImplementedError

    def volume_parameter(self, t):
        """Polar direction used by the volume map at curve parameter ``t``."""
        return self.curve(t)[0]


@dataclass(frozen=True)
class Ellipsoid(Domain):
    axes: tuple[float, ...]

    kind = "ellipsoid"

    def __post_init__(self):
        axes = tuple(float(a) for a in self.axes)
        if len(axes) < 2:
            raise UnsupportedDimension(f"ellipsoid needs at least 2 axes, got {len(axes)}")
        for i, a in enumerate(axes):
            if not math.isfinite(a) or a <= 0:
                raise NonPositiveAxis(f"axis a_{i + 1} = {a} is not positive")
        object.__setattr__(self, "axes", axes)

    @property
    def dim(self) -> int:
        return len(self.axes)

    @cached_property
    def a(self) -> np.ndarray:
        a = np.array(self.axes)
        _readonly(a)
        return a

    @property
    def is_ball(self) -> bool:
        return max(self.axes) == min(self.axes)

    def level(self, points) -> np.ndarray:
        x = np.asarray(points, dtype=float)
        return np.sum((x / self.a) ** 2, axis=-1)

    def contains(self, points, tol: float = 0.0) -> np.ndarray:
        return self.level(points) < 1.0 + tol

    def to_dict(self) -> dict:
        return {"kind": "ellipsoid", "axes": list(self.axes)}

    def curve(self, t):
        if self.dim != 2:
            raise UnsupportedDimension("curve() is only defined for N = 2")
        a, b = self.axes
        t = np.asarray(t, dtype=float)
        c, s = np.cos(t), np.sin(t)
        g = np.stack([a * c, b * s], axis=-1)
        g1 = np.stack([-a * s, b * c], axis=-1)
        g2 = np.stack([-a * c, -b * s], axis=-1)
        return g, g1, g2


@dataclass(frozen=True)
class Fourier2D(Domain):
    """Plane domain ``{r < R(theta)}`` with ``R = c0 + sum c_k cos k theta + s_k sin k theta``."""

    cos: tuple[float, ...]
    sin: tuple[float, ...] = ()

    kind = "fourier2d"
    dim = 2

    def __post_init__(self):
        c = [float(v) for v in self.cos]
        s = [float(v) for v in self.sin]
        if not c:
            raise DomainError("fourier2d needs at least the constant coefficient c_0")
        K = max(len(c) - 1, len(s))
        c += [0.0] * (K + 1 - len(c))
        s += [0.0] * (K - len(s))
        object.__setattr__(self, "cos", tuple(c))
        object.__setattr__(self, "sin", tuple(s))
        if not all(math.isfinite(v) for v in c + s):
            raise DomainError("fourier2d coefficients must be finite")
        theta = np.linspace(0.0, TWO_PI, max(2048, 64 * (K + 1)), endpoint=False)
        rmin = float(self.radius(theta).min())
        if rmin <= 0:
            raise NonPositiveRadius(f"R(theta) reaches {rmin:.6g} <= 0")

    @property
    def degree(self) -> int:
        return len(self.sin)

    def radius(self, theta, deriv: int = 0) -> np.ndarray:
        theta = np.asarray(theta, dtype=float)
        out = np.full(theta.shape, self.cos[0] if deriv == 0 else 0.0)
        for k in range(1, self.degree + 1):
            ck, sk = self.cos[k], self.sin[k - 1]
            if ck == 0.0 and sk == 0.0:
                continue
            c, s = np.cos(k * theta), np.sin(k * theta)
            if deriv == 0:
                out = out + ck * c + sk * s
            elif deriv == 1:
                out = out + k * (sk * c - ck * s)
            elif deriv == 2:
                out = out - k * k * (ck * c + sk * s)
            else:
                raise ValueError("deriv must be 0, 1 or 2")
        return out

    def contains(self, points, tol: float = 0.0) -> np.ndarray:
        x = np.asarray(points, dtype=float)
        r = np.hypot(x[..., 0], x[..., 1])
        return r < self.radius(np.arctan2(x[..., 1], x[..., 0])) * (1.0 + tol)

    def to_dict(self) -> dict:
        return {"kind": "fourier2d", "cos": list(self.cos), "sin": list(self.sin)}

    def curve(self, t):
        t = np.asarray(t, dtype=float)
        R, R1, R2 = self.radius(t), self.radius(t, 1), self.radius(t, 2)
        e = np.stack([np.cos(t), np.sin(t)], axis=-1)
        f = np.stack([-np.sin(t), np.cos(t)], axis=-1)
        g = R[..., None] * e
        g1 = R1[..., None] * e + R[..., None] * f
        g2 = (R2 - R)[..., None] * e + 2.0 * R1[..., None] * f
        return g, g1, g2


def build_domain(spec) -> Domain:
    """Validate a domain description and return the corresponding Domain.

    ``spec`` is a dict, a JSON string, or a path to a JSON file holding
    ``{"kind": "ellipsoid", "axes": [...]}`` or
    ``{"kind": "fourier2d", "cos": [c0, c1, ...], "sin": [s1, ...]}``.
    """
    if isinstance(spec, Domain):
        return spec
    if isinstance(spec, (str, Path)):
        text = str(spec)
        if not text.lstrip().startswith("{"):
            text = Path(text).read_text()
        spec = json.loads(text)
    if not isinstance(spec, dict):
        raise DomainError(f"domain spec must be a JSON object, got {type(spec).__name__}")
    kind = str(spec.get("kind", "")).lower()
    if kind == "ellipsoid":
        if "axes" not in spec:
            raise DomainError("ellipsoid spec needs 'axes'")
        return Ellipsoid(tuple(spec["axes"]))
    if kind == "fourier2d":
        if spec.get("dim", 2) != 2:
            raise UnsupportedDimension("fourier2d domains live in N = 2 only")
        return Fourier2D(tuple(spec.get("cos", ())), tuple(spec.get("sin", ())))
    raise DomainError(f"unknown domain kind {spec.get('kind')!r}")


# ---------------------------------------------------------------- grids


@dataclass(frozen=True, eq=False)
class BoundaryGrid:
    domain: Domain
    order: int
    params: np.ndarray  # (n, N-1) curve parameter or sphere angles
    nodes: np.ndarray  # (n, N)
    weights: np.ndarray  # (n,)
    normals: np.ndarray  # (n, N), outward unit
    curvature: np.ndarray  # (n,) mean curvature H

    @property
    def size(self) -> int:
        return len(self.weights)

    def integrate(self, values) -> float:
        return float(np.dot(self.weights, values))


@dataclass(frozen=True, eq=False)
class VolumeGrid:
    domain: Domain
    radial_order: int
    angular_order: int
    nodes: np.ndarray  # (m, N)
    weights: np.ndarray  # (m,)
    distance: np.ndarray  # (m,) distance to the boundary

    @property
    def size(self) -> int:
        return len(self.weights)

    def integrate(self, values) -> float:
        return float(np.dot(self.weights, values))


def sphere_angles_to_points(angles) -> np.ndarray:
    """Map hyperspherical angles ``(phi_1..phi_{N-2}, psi)`` to unit vectors."""
    angles = np.atleast_2d(np.asarray(angles, dtype=float))
    polar, psi = angles[:, :-1], angles[:, -1]
    n, k = polar.shape
    out = np.empty((n, k + 2))
    s = np.ones(n)
    for j in range(k):
        out[:, j] = s * np.cos(polar[:, j])
        s = s * np.sin(polar[:, j])
    out[:, k] = s * np.cos(psi)
    out[:, k + 1] = s * np.sin(psi)
    return out


def sphere_rule(dim: int, order: int):
    """Tensor rule on S^(dim-1): returns (angles, points, weights).

    The polar angle phi_j carries the density sin^m(phi_j), m = dim-1-j;
    in t = cos(phi_j) that is the Jacobi weight (1-t^2)^((m-1)/2).
    """
    if dim < 3:
        raise UnsupportedDimension("sphere_rule is for dim >= 3")
    n_pol = max(order // 2, 2)
    grids, wts = [], []
    for j in range(1, dim - 1):
        m = dim - 1 - j
        t, w = special.roots_jacobi(n_pol, (m - 1) / 2, (m - 1) / 2)
        grids.append(np.arccos(t)[::-1])
        wts.append(w[::-1])
    grids.append(TWO_PI * np.arange(order) / order)
    wts.append(np.full(order, TWO_PI / order))
    mesh = np.meshgrid(*grids, indexing="ij")
    angles = np.stack([g.ravel() for g in mesh], axis=-1)
    wmesh = np.meshgrid(*wts, indexing="ij")
    weights = np.prod(np.stack([w.ravel() for w in wmesh], axis=-1), axis=-1)
    return angles, sphere_angles_to_points(angles), weights


def _ellipsoid_frame(domain: Ellipsoid, omega: np.ndarray):
    """Boundary point, outward normal, area factor and H at x = A omega."""
    a = domain.a
    N = domain.dim
    x = omega * a
    g = omega / a  # = x / a^2, half the level-set gradient
    p = np.linalg.norm(g, axis=-1)
    normals = g / p[:, None]
    jac = float(np.prod(a)) * p
    d = 1.0 / a**2
    H = (np.sum(d) * p**2 - np.sum(g**2 * d, axis=-1)) / ((N - 1) * p**3)
    return x, normals, jac, H


def _curve_frame(domain: Domain, t):
    g, g1, g2 = domain.curve(t)
    speed = np.hypot(g1[..., 0], g1[..., 1])
    normals = np.stack([g1[..., 1], -g1[..., 0]], axis=-1) / speed[..., None]
    kappa = (g1[..., 0] * g2[..., 1] - g1[..., 1] * g2[..., 0]) / speed**3
    return g, normals, speed, kappa


def boundary_frame(domain: Domain, params):
    """Points and outward normals at boundary parameters (curve t or sphere angles)."""
    params = np.asarray(params, dtype=float)
    if domain.dim == 2:
        t = params.reshape(-1)
        x, nu, _, _ = _curve_frame(domain, t)
        return x, nu
    omega = sphere_angles_to_points(params)
    x, nu, _, _ = _ellipsoid_frame(domain, omega)
    return x, nu


def boundary_grid(domain: Domain, order: int | None = None) -> BoundaryGrid:
    """Quadrature nodes, weights, normals and mean curvature on the boundary."""
    if order is None:
        order = default_boundary_order(domain.dim)
    order = int(order)
    if order < 8:
        raise ValueError(f"boundary order must be >= 8, got {order}")
    if isinstance(domain, Fourier2D) and domain.dim != 2:
        raise UnsupportedDimension("fourier2d boundary grids need N = 2")
    if domain.dim == 2:
        t = TWO_PI * np.arange(order) / order
        x, nu, speed, kappa = _curve_frame(domain, t)
        params = t[:, None]
        weights = speed * (TWO_PI / order)
        H = kappa
    else:
        angles, omega, w_sphere = sphere_rule(domain.dim, order)
        x, nu, jac, H = _ellipsoid_frame(domain, omega)
        params = angles
        weights = w_sphere * jac
    _readonly(params, x, weights, nu, H)
    return BoundaryGrid(domain, order, params, x, weights, nu, H)


def volume_grid(domain: Domain, radial_order: int | None = None,
                angular_order: int | None = None) -> VolumeGrid:
    """Polar tensor rule ``x = r * boundary_point`` with distance-to-boundary values."""
    N = domain.dim
    radial_order = int(radial_order or default_radial_order(N))
    angular_order = int(angular_order or default_volume_angular_order(N))
    if radial_order < 8 or angular_order < 8:
        raise ValueError(f"volume grid orders must be >= 8, got ({radial_order}, {angular_order})")
    r, wr = special.roots_legendre(radial_order)
    r = 0.5 * (r + 1.0)
    wr = 0.5 * wr
    if N == 2:
        t = TWO_PI * np.arange(angular_order) / angular_order
        g, g1, _ = domain.curve(t)
        cross = g[:, 0] * g1[:, 1] - g[:, 1] * g1[:, 0]
        nodes = (r[:, None, None] * g[None, :, :]).reshape(-1, 2)
        weights = (wr[:, None] * r[:, None] * cross[None, :] * (TWO_PI / angular_order)).reshape(-1)
    else:
        _, omega, w_sphere = sphere_rule(N, angular_order)
        a = domain.a
        nodes = (r[:, None, None] * (omega * a)[None, :, :]).reshape(-1, N)
        weights = (wr[:, None] * r[:, None] ** (N - 1) * w_sphere[None, :]).reshape(-1) * float(np.prod(a))
    dist = distance_to_boundary(domain, nodes)
    _readonly(nodes, weights, dist)
    return VolumeGrid(domain, radial_order, angular_order, nodes, weights, dist)


# ---------------------------------------------------------------- projection


def _ellipsoid_extreme(axes: np.ndarray, y: np.ndarray, farthest: bool = False):
    """Closest (or farthest) point of the ellipsoid to each row of ``y``.

    Stationary points satisfy ``x_i = a_i^2 y_i / (a_i^2 + t)`` with
    ``sum (a_i y_i / (a_i^2 + t))^2 = 1``.  The closest point has
    ``t > -min a^2``, the farthest ``t < -max a^2``.  Writing ``t = -e + s``
    (closest) or ``t = -e - s`` (farthest), ``e`` the extreme squared axis,
    the constraint is monotone in ``s > 0`` and is bisected in ``s`` so the
    root keeps full relative precision near the branch end.  Points with no
    component along the extreme axes may have their root at ``s = 0``; that
    case is closed form.  Returns (points, distances).
    """
    a = np.asarray(axes, dtype=float)
    a2 = a * a
    y = np.atleast_2d(np.asarray(y, dtype=float))
    edge = a2.max() if farthest else a2.min()
    group = a2 == edge
    gap = np.where(group, 0.0, a2 - edge)
    sgn = -1.0 if farthest else 1.0
    ae = math.sqrt(edge)
    yg = np.linalg.norm(y[:, group], axis=1)
    ynorm = np.linalg.norm(y, axis=1)

    other = ~group
    with np.errstate(divide="ignore", invalid="ignore"):
        x_end = np.where(other, a2 * y / gap, 0.0)
    s_end = np.sum(np.where(other, x_end**2 / a2, 0.0), axis=1)
    degenerate = (yg == 0.0) & (s_end <= 1.0)
    x = np.empty_like(y)
    if np.any(degenerate):
        xd = x_end[degenerate].copy()
        rad = np.sqrt(np.maximum(edge * (1.0 - s_end[degenerate]), 0.0))
        k = np.flatnonzero(group)
        direction = np.zeros((len(xd), len(k)))
        direction[:, 0] = 1.0
        xd[:, k] = rad[:, None] * direction
        x[degenerate] = xd

    gen = ~degenerate
    if np.any(gen):
        yy = y[gen]
        lo = ae * yg[gen]
        hi = a.max() * ynorm[gen] + edge + 1.0
        s = lo.copy()
        ay2 = (a * yy) ** 2
        # safeguarded Newton on G(s) = F(s)^(-1/2) - 1, increasing in s
        for _ in range(200):
            den = gap + sgn * s[:, None]
            live = ay2 > 0.0  # zero components contribute nothing, even when den = 0
            den = np.where(live, den, 1.0)
            F = np.sum(ay2 / den**2, axis=1)
            G = 1.0 / np.sqrt(F) - 1.0
            lo = np.where(G <= 0.0, s, lo)
            hi = np.where(G >= 0.0, s, hi)
            dF = -2.0 * sgn * np.sum(ay2 / den**3, axis=1)
            dG = -0.5 * F**-1.5 * dF
            with np.errstate(divide="ignore", invalid="ignore"):
                step = s - G / dG
            bad = ~np.isfinite(step) | (step <= lo) | (step >= hi)
            s_new = np.where(bad, 0.5 * (lo + hi), step)
            if np.all((np.abs(s_new - s) <= 4e-16 * s_new) | (G == 0.0)):
                s = s_new
                break
            s = s_new
        den = gap + sgn * s[:, None]
        x[gen] = np.where(yy != 0.0, a2 * yy / np.where(yy != 0.0, den, 1.0), 0.0)
    d = np.linalg.norm(x - y, axis=1)
    return x, d


def _curve_newton(domain: Domain, y: np.ndarray, t0: np.ndarray, h: float,
                  sign: float = 1.0, maxiter: int = 80):
    """Newton on g(t) = sign * |gamma(t) - y|^2 / 2 with steps clipped to ``h``."""
    t = t0.astype(float).copy()
    done = np.zeros(len(t), dtype=bool)
    for _ in range(maxiter):
        g, g1, g2 = domain.curve(t)
        diff = g - y
        d1 = sign * np.sum(diff * g1, axis=1)
        d2 = sign * (np.sum(g1 * g1, axis=1) + np.sum(diff * g2, axis=1))
        scale = np.linalg.norm(g1, axis=1) * np.maximum(np.linalg.norm(diff, axis=1), 1e-300)
        ok = np.abs(d1) <= 1e-14 * scale
        step = np.where(d2 > 0, -d1 / np.where(d2 > 0, d2, 1.0), -np.sign(d1) * h)
        step = np.clip(step, -h, h)
        step[ok] = 0.0
        t += step
        done |= ok | (np.abs(step) <= 1e-15)
        if np.all(done):
            break
    return t, done


def _fourier_projection(domain: Domain, y: np.ndarray, n_seed: int = 2048):
    y = np.atleast_2d(np.asarray(y, dtype=float))
    ts = TWO_PI * np.arange(n_seed) / n_seed
    xs = domain.curve(ts)[0]
    tree = cKDTree(xs)
    k = 3
    _, idx = tree.query(y, k=k)
    best_d = np.full(len(y), np.inf)
    best_x = np.zeros_like(y)
    h = TWO_PI / n_seed
    converged_any = np.zeros(len(y), dtype=bool)
    for j in range(k):
        t, done = _curve_newton(domain, y, ts[idx[:, j]], h)
        xg = domain.curve(t)[0]
        d = np.linalg.norm(xg - y, axis=1)
        better = done & (d < best_d)
        best_d = np.where(better, d, best_d)
        best_x[better] = xg[better]
        converged_any |= done
    if not np.all(converged_any) or not np.all(np.isfinite(best_d)):
        bad = int(np.sum(~converged_any))
        raise ProjectionDiverged(f"boundary projection failed at {bad} point(s)")
    return best_x, best_d


def closest_boundary_points(domain: Domain, points):
    """Closest boundary point and distance for each row of ``points``."""
    y = np.atleast_2d(np.asarray(points, dtype=float))
    if isinstance(domain, Ellipsoid):
        return _ellipsoid_extreme(domain.a, y)
    return _fourier_projection(domain, y)


def distance_to_boundary(domain: Domain, points) -> np.ndarray:
    """delta_Gamma at each point."""
    return closest_boundary_points(domain, points)[1]


# ---------------------------------------------------------------- refinement


def refine_boundary_extreme(domain: Domain, bgrid: BoundaryGrid,
                            fun: Callable[[np.ndarray, np.ndarray], np.ndarray],
                            mode: str = "max"):
    """Extreme of ``fun(points, normals)`` over the boundary.

    Starts from the best grid node and polishes with a local optimizer in the
    boundary parameter.  Returns (value, point).
    """
    sign = -1.0 if mode == "max" else 1.0
    vals = fun(bgrid.nodes, bgrid.normals)
    j = int(np.argmax(vals) if mode == "max" else np.argmin(vals))
    p0 = bgrid.params[j]

    def obj(p):
        x, nu = boundary_frame(domain, np.atleast_2d(p))
        return sign * float(fun(x, nu)[0])

    if domain.dim == 2:
        h = TWO_PI / bgrid.order
        res = optimize.minimize_scalar(lambda t: obj([t]), bounds=(p0[0] - h, p0[0] + h),
                                       method="bounded", options={"xatol": 1e-14})
        best_p = np.array([res.x])
        best = res.fun
    else:
        n = len(p0)
        bounds = [(0.0, math.pi)] * (n - 1) + [(p0[-1] - math.pi, p0[-1] + math.pi)]
        res = optimize.minimize(obj, p0, method="L-BFGS-B", bounds=bounds,
                                options={"ftol": 1e-16, "gtol": 1e-13, "maxiter": 500})
        best_p, best = res.x, res.fun
    if best > sign * vals[j]:  # never worse than the grid
        best_p, best = p0, sign * vals[j]
    x, _ = boundary_frame(domain, np.atleast_2d(best_p))
    return sign * float(best), x[0]


# ---------------------------------------------------------------- summaries


@dataclass(frozen=True)
class GeometrySummary:
    dim: int
    volume: float
    surface: float
    diameter: float
    r_i: float
    r_e: float  # math.inf for convex domains
    mean_convex: bool
    estimated: bool = False  # True when r_i / r_e come from sampling

    @property
    def convex(self) -> bool:
        return math.isinf(self.r_e)


def _tangent_ball_radii(x: np.ndarray, nu: np.ndarray, inward: bool) -> np.ndarray:
    """Largest ball tangent at each node (inside or outside) missing every other node."""
    sgn = 1.0 if inward else -1.0
    out = np.full(len(x), np.inf)
    chunk = 512
    for s in range(0, len(x), chunk):
        xs, ns = x[s:s + chunk], nu[s:s + chunk]
        d = xs[:, None, :] - x[None, :, :]
        proj = sgn * np.einsum("ijk,ik->ij", d, ns)
        dist2 = np.sum(d * d, axis=-1)
        with np.errstate(divide="ignore", invalid="ignore"):
            r = np.where(proj > 1e-14 * np.sqrt(dist2), dist2 / (2.0 * proj), np.inf)
        out[s:s + chunk] = r.min(axis=1)
    return out


def _curve_diameter(domain: Domain, dense: BoundaryGrid) -> float:
    x = dense.nodes
    best, pair = -1.0, (0, 0)
    chunk = 512
    for s in range(0, len(x), chunk):
        d2 = np.sum((x[s:s + chunk, None, :] - x[None, :, :]) ** 2, axis=-1)
        k = int(np.argmax(d2))
        i, j = divmod(k, len(x))
        if d2[i, j] > best:
            best, pair = d2[i, j], (s + i, j)
    t0 = np.array([dense.params[pair[0], 0], dense.params[pair[1], 0]])

    def obj(tt):
        g = domain.curve(tt)[0]
        return -float(np.sum((g[0] - g[1]) ** 2))

    res = optimize.minimize(obj, t0, method="Nelder-Mead",
                            options={"xatol": 1e-13, "fatol": 1e-16, "maxiter": 2000})
    return math.sqrt(max(best, -res.fun))


def geometric_summary(domain: Domain, order: int | None = None) -> GeometrySummary:
    """|Omega|, |Gamma|, diameter, interior/exterior sphere radii, mean convexity."""
    N = domain.dim
    bg = boundary_grid(domain, order)
    surface = float(np.sum(bg.weights))
    volume = bg.integrate(np.sum(bg.nodes * bg.normals, axis=1)) / N
    if isinstance(domain, Ellipsoid):
        a = domain.a
        return GeometrySummary(N, volume, surface, 2.0 * float(a.max()),
                               float(a.min() ** 2 / a.max()), math.inf, True, False)

    dense = boundary_grid(domain, 4 * bg.order)
    diameter = _curve_diameter(domain, dense)
    kappa = dense.curvature
    kmax, _ = refine_boundary_extreme(
        domain, dense, lambda x, nu: _curve_frame(domain, _params_of(x))[3], "max")
    if kappa.min() >= 0.0:
        kmin, _ = refine_boundary_extreme(
            domain, dense, lambda x, nu: _curve_frame(domain, _params_of(x))[3], "min")
    else:
        kmin = float(kappa.min())
    if kmin >= 0.0:
        return GeometrySummary(N, volume, surface, diameter, 1.0 / kmax, math.inf, True, False)
    r_in = min(1.0 / kmax, float(_tangent_ball_radii(dense.nodes, dense.normals, True).min()))
    r_out = min(1.0 / -kmin, float(_tangent_ball_radii(dense.nodes, dense.normals, False).min()))
    return GeometrySummary(N, volume, surface, diameter, r_in, r_out, False, True)


def _params_of(points: np.ndarray) -> np.ndarray:
    """Polar angle of points on a Fourier2D boundary (its curve parameter)."""
    return np.arctan2(points[:, 1], points[:, 0])


def radii_about(domain: Domain, z, bgrid: BoundaryGrid | None = None) -> tuple[float, float]:
    """(rho_i, rho_e): min and max of |x - z| over the boundary."""
    z = np.asarray(z, dtype=float).reshape(1, -1)
    if z.shape[1] != domain.dim:
        raise ValueError(f"point has dimension {z.shape[1]}, domain has {domain.dim}")
    if not bool(domain.contains(z)[0]):
        raise CenterOutsideDomain(f"z = {z[0].tolist()} is not inside the domain")
    if isinstance(domain, Ellipsoid):
        rho_i = float(_ellipsoid_extreme(domain.a, z)[1][0])
        rho_e = float(_ellipsoid_extreme(domain.a, z, farthest=True)[1][0])
        return rho_i, rho_e
    rho_i = float(_fourier_projection(domain, z)[1][0])
    bgrid = bgrid or boundary_grid(domain)
    rho_e, _ = refine_boundary_extreme(
        domain, bgrid, lambda x, nu: np.linalg.norm(x - z, axis=1), "max")
    return rho_i, float(rho_e)


@dataclass(frozen=True, eq=False)
class Grids:
    """A boundary and a volume grid for the same domain."""

    boundary: BoundaryGrid
    volume: VolumeGrid

    @property
    def domain(self) -> Domain:
        return self.boundary.domain

    @property
    def orders(self) -> dict:
        return {"boundary": self.boundary.order, "radial": self.volume.radial_order,
                "angular": self.volume.angular_order}


def make_grids(domain: Domain, boundary_order: int | None = None,
               radial_order: int | None = None, angular_order: int | None = None) -> Grids:
    return Grids(boundary_grid(domain, boundary_order),
                 volume_grid(domain, radial_order, angular_order))


def ellipse_as_fourier(a: float, b: float, degree: int | None = None) -> Fourier2D:
    """Truncated Fourier series of the polar radius of the ellipse x^2/a^2 + y^2/b^2 = 1.

    R(theta) = ab / sqrt(b^2 cos^2 + a^2 sin^2) is analytic, so the coefficients
    decay geometrically.  With ``degree=None`` the truncation grows until the
    discarded tail is below round-off (relative 1e-16).
    """
    if degree is None:
        degree = 16
        while True:
            trial = ellipse_as_fourier(a, b, degree)
            tail = max(abs(c) for c in trial.cos[-4:])
            if tail <= 1e-16 * trial.cos[0] or degree >= 1024:
                return trial
            degree *= 2
    n = 8 * (degree + 1)
    t = TWO_PI * np.arange(n) / n
    R = a * b / np.sqrt((b * np.cos(t)) ** 2 + (a * np.sin(t)) ** 2)
    F = np.fft.rfft(R) / n
    cos = np.concatenate([[F[0].real], 2.0 * F[1:degree + 1].real])
    sin = -2.0 * F[1:degree + 1].imag
    cos[1::2] = 0.0  # odd modes vanish by symmetry
    return Fourier2D(tuple(float(c) for c in cos), tuple(0.0 for _ in sin))
