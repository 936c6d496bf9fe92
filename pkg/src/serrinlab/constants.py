"""Closed-form constants and exponents of the stability estimates.

Dimensionless factors that are only known to exist (the ``k`` in the
Hardy-Poincare constant bounds) are set to 1 and every quantity built from
them carries ``placeholder_k = True``; such values are not certified bounds.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

from .errors import InvalidDimension
from .geometry import GeometrySummary, unit_ball_volume

DEFAULT_THETA = 0.1

SERRIN = "serrin"
SBT = "sbt"
HK = "hk"
ONE_OVER_H = "one-over-h"
PROBLEMS = (SERRIN, SBT, HK, ONE_OVER_H)


def c_N(N: int) -> float:
    """Constant of the gradient bound: 3/2 in the plane, N/2 otherwise."""
    if N < 2:
        raise InvalidDimension(f"N must be >= 2, got {N}")
    return 1.5 if N == 2 else N / 2.0


def gradient_bound_general(N: int, d: float, r_e: float) -> float:
    """M <= c_N d (d + r_e) / r_e; reduces to c_N d when r_e is infinite."""
    if math.isinf(r_e):
        return c_N(N) * d
    return c_N(N) * d * (d + r_e) / r_e


def gradient_bound_convex(N: int, d: float) -> float:
    return c_N(N) * d


def oscillation_constants(N: int, p: float) -> tuple[float, float]:
    """(a_{N,p}, alpha_{N,p}) of the L^p oscillation lemma."""
    B = unit_ball_volume(N)
    a = 2.0 * (N + p) / (N ** (N / (N + p)) * p ** (p / (N + p)) * B ** (1.0 / (N + p)))
    alpha = p / N * B ** (1.0 / p)
    return a, alpha


def lemma_oscillation_constant(N: int, p: float, d: float, r_i: float, M: float) -> float:
    """C with rho_e - rho_i <= C ||h - h_Omega||_p^{p/(N+p)}, valid in both regimes."""
    a, alpha = oscillation_constants(N, p)
    e = N / (N + p)
    return max(2.0 * a, alpha ** (-p / (N + p))) * d**e / r_i * (1.0 + M / d) ** e


def lemma_oscillation_constant_geometric(N: int, p: float, d: float, r_i: float,
                                         r_e: float) -> float:
    """Same constant with M replaced by its geometric bound."""
    a, alpha = oscillation_constants(N, p)
    e = N / (N + p)
    tail = c_N(N) if math.isinf(r_e) else c_N(N) * (d + r_e) / r_e
    return max(2.0 * a, alpha ** (-p / (N + p))) * d**e / r_i * (1.0 + tail) ** e


def distance_lower_bound(r_i: float, M: float) -> float:
    """delta_Gamma(z) >= r_i^2 / (2M) at a minimum point z of u."""
    return r_i * r_i / (2.0 * M)


def john_bounds(d: float, r_i: float, delta_z: float) -> tuple[float, float]:
    """(b0, L0) upper bounds for C^2 domains."""
    return d / r_i, d / min(r_i, delta_z)


def hs_condition(N: int, r: float, p: float, alpha: float) -> bool:
    """1 <= p <= r <= Np/(N - p(1-alpha)), p(1-alpha) < N, 0 <= alpha <= 1."""
    if not (0.0 <= alpha <= 1.0 and p >= 1.0 and p * (1.0 - alpha) < N):
        return False
    return p <= r <= N * p / (N - p * (1.0 - alpha)) * (1.0 + 1e-14)


def bs_condition(r: float, p: float, alpha: float) -> bool:
    """r = p >= 1 and alpha = 0."""
    return r == p and p >= 1.0 and alpha == 0.0


def _power(x: float, e: float) -> float:
    """x**e, or +inf when the result overflows (the bounds stay valid, just useless)."""
    try:
        return math.pow(x, e)
    except OverflowError:
        return math.inf


def _prod(*factors: float) -> float:
    out = 1.0
    for f in factors:
        out *= f
    return out if math.isfinite(out) else math.inf


def mu_inverse_bounds(N: int, r: float, p: float, alpha: float, d: float, r_i: float,
                      delta_z: float, volume: float, k: float = 1.0) -> dict[str, float]:
    """Upper bounds for 1/mu (base point z) and 1/mu_bar (zero mean), k placeholder.

    Keys name the regime and the John parameter used.  Regime ``hs`` needs the
    first exponent condition, ``bs`` the second; inapplicable regimes are left out.
    """
    b0, L0 = john_bounds(d, r_i, delta_z)
    out: dict[str, float] = {}
    if hs_condition(N, r, p, alpha):
        e = (1.0 - alpha) / N + 1.0 / r - 1.0 / p
        out["hs_mu_bar_b0"] = _prod(k, _power(b0, N), _power(volume, e))
        out["hs_mu_b0"] = _prod(k, _power(b0 / delta_z ** (1.0 / r), N),
                                _power(volume, e + 1.0 / r))
        out["hs_mu_L0"] = _prod(k, _power(L0, N), _power(volume, e))
        out["hs_mu_bar_c2"] = _prod(k, _power(d / r_i, N), _power(volume, e))
        out["hs_mu_c2"] = _prod(k, _power(d / min(r_i, delta_z), N), _power(volume, e))
    if bs_condition(r, p, alpha):
        E = 3.0 * N * (1.0 + N / p)
        out["bs_mu_bar_b0"] = _prod(k, _power(b0, E), d)
        out["bs_mu_b0"] = _prod(k, _power(volume / delta_z**N, 1.0 / r), _power(b0, E), d)
        out["bs_mu_L0"] = _prod(k, _power(L0, E), d)
        out["bs_mu_bar_c2"] = _prod(k, _power(d, E + 1), _power(r_i, -E))
        out["bs_mu_c2"] = _prod(k, _power(d, E + 1), _power(min(r_i, delta_z), -E))
    return out


def trace_factor(N: int, r_i: float, mu: float) -> float:
    """(2/r_i)(1 + N/(r_i mu^2)) of the harmonic trace inequality."""
    if mu <= 0.0:
        return math.inf
    return 2.0 / r_i * (1.0 + N / (r_i * mu * mu))


def feldman_factor(N: int, M: float, R: float, r_i: float, mu: float) -> float:
    """((M+R)/r_i)(1 + N/(r_i mu^2)): ||h_nu||_2 <= factor * ||u_nu - R||_2."""
    if mu <= 0.0:
        return math.inf
    return (M + R) / r_i * (1.0 + N / (r_i * mu * mu))


def sbt_factor(N: int, M: float, R: float, r_i: float, d: float, mu: float) -> float:
    """R{d + M(M+R)/r_i (1 + N/(r_i mu^2))}: ||u_nu - R||_2 <= factor * ||H0 - H||_2."""
    if mu <= 0.0:
        return math.inf
    return R * (d + M * (M + R) / r_i * (1.0 + N / (r_i * mu * mu)))


def tau(N: int, problem: str = SERRIN, theta: float = DEFAULT_THETA) -> float:
    """Stability exponent tau_N of the L^2-type estimates."""
    if not isinstance(N, int) or N < 2:
        raise InvalidDimension(f"N must be an integer >= 2, got {N!r}")
    if not 0.0 < theta < 1.0:
        raise ValueError(f"theta must lie in (0, 1), got {theta}")
    problem = problem.lower()
    if problem == SERRIN:
        if N == 2:
            return 1.0
        if N == 3:
            return 1.0 - theta
        return 2.0 / (N - 1)
    if problem in (SBT, HK, ONE_OVER_H):
        if N <= 3:
            return 1.0
        if N == 4:
            return 1.0 - theta
        return 2.0 / (N - 2)
    raise ValueError(f"unknown problem {problem!r}; expected one of {PROBLEMS}")


def tau_table(N_max: int = 6, theta: float = DEFAULT_THETA) -> dict[str, dict[int, float]]:
    return {prob: {n: tau(n, prob, theta) for n in range(2, N_max + 1)}
            for prob in (SERRIN, SBT)}


@dataclass(frozen=True)
class ConstantLedger:
    N: int
    p: float
    theta: float
    diameter: float
    r_i: float
    r_e: float
    volume: float
    volume_is_bound: bool
    R: float | None
    H0: float | None
    c_N: float
    M: float | None
    M_bound_general: float
    M_bound_convex: float
    mean_convex_unverified_constant: bool
    a_Np: float
    alpha_Np: float
    b0_bound: float
    L0_bound: float
    delta_z: float
    delta_z_is_bound: bool
    delta_z_lower_bound: float | None
    mu_inverse: dict[str, float]
    mu_inverse_trace: float
    trace_factor: float
    feldman_factor: float | None
    sbt_factor: float | None
    lemma_constant: float | None
    lemma_constant_geometric: float
    tau_serrin: float
    tau_sbt: float
    tau_table: dict[str, dict[int, float]] = field(default_factory=dict)
    placeholder_k: bool = True


def ledger(summary: GeometrySummary | None = None, N: int | None = None, p: float = 2.0,
           delta_z: float | None = None, M: float | None = None, *,
           d: float | None = None, r_i: float | None = None, r_e: float | None = None,
           volume: float | None = None, surface: float | None = None,
           mean_convex: bool | None = None, theta: float = DEFAULT_THETA) -> ConstantLedger:
    """Evaluate every closed-form constant for the given geometry.

    Geometry comes from ``summary`` or the keyword overrides.  A missing volume
    is replaced by |B|(d/2)^N and a missing delta_Gamma(z) by r_i^2/(2M) (or by
    r_i when M is unknown); both substitutions are flagged.
    """
    if summary is not None:
        N = N or summary.dim
        d = d if d is not None else summary.diameter
        r_i = r_i if r_i is not None else summary.r_i
        r_e = r_e if r_e is not None else summary.r_e
        volume = volume if volume is not None else summary.volume
        surface = surface if surface is not None else summary.surface
        mean_convex = summary.mean_convex if mean_convex is None else mean_convex
    if N is None or d is None or r_i is None:
        raise ValueError("ledger needs N, the diameter and r_i")
    if not isinstance(N, int) or N < 2:
        raise InvalidDimension(f"N must be an integer >= 2, got {N!r}")
    if p < 1:
        raise ValueError(f"p must be >= 1, got {p}")
    if d <= 0 or r_i <= 0:
        raise ValueError("diameter and r_i must be positive")
    r_e = math.inf if r_e is None else r_e
    mean_convex = bool(mean_convex) if mean_convex is not None else math.isinf(r_e)

    volume_is_bound = volume is None
    if volume is None:
        volume = unit_ball_volume(N) * (d / 2.0) ** N
    R = H0 = None
    if surface is not None:
        R = N * volume / surface
        H0 = 1.0 / R
    M_general = gradient_bound_general(N, d, r_e)
    M_convex = gradient_bound_convex(N, d)
    dz_lower = distance_lower_bound(r_i, M) if M else None
    delta_z_is_bound = delta_z is None
    if delta_z is None:
        delta_z = dz_lower if dz_lower is not None else r_i
    a, alpha = oscillation_constants(N, p)
    b0, L0 = john_bounds(d, r_i, delta_z)

    mu_inv = mu_inverse_bounds(N, 2.0, 2.0, 0.5, d, r_i, delta_z, volume)
    mu_inv.update(mu_inverse_bounds(N, p, p, 0.0, d, r_i, delta_z, volume))
    mu_trace_inv = mu_inv["hs_mu_c2"]
    mu_trace = 1.0 / mu_trace_inv
    feld = sbt = lemma = None
    if M is not None and R is not None:
        feld = feldman_factor(N, M, R, r_i, mu_trace)
        sbt = sbt_factor(N, M, R, r_i, d, mu_trace)
    if M is not None:
        lemma = lemma_oscillation_constant(N, p, d, r_i, M)
    lemma_geo = lemma_oscillation_constant_geometric(N, p, d, r_i, r_e)
    return ConstantLedger(
        N=N, p=p, theta=theta, diameter=d, r_i=r_i, r_e=r_e,
        volume=volume, volume_is_bound=volume_is_bound, R=R, H0=H0,
        c_N=c_N(N), M=M, M_bound_general=M_general, M_bound_convex=M_convex,
        mean_convex_unverified_constant=bool(mean_convex and not math.isinf(r_e)),
        a_Np=a, alpha_Np=alpha, b0_bound=b0, L0_bound=L0,
        delta_z=delta_z, delta_z_is_bound=delta_z_is_bound, delta_z_lower_bound=dz_lower,
        mu_inverse=mu_inv, mu_inverse_trace=mu_trace_inv,
        trace_factor=trace_factor(N, r_i, mu_trace),
        feldman_factor=feld, sbt_factor=sbt, lemma_constant=lemma,
        lemma_constant_geometric=lemma_geo,
        tau_serrin=tau(N, SERRIN, theta), tau_sbt=tau(N, SBT, theta),
        tau_table=tau_table(max(N, 5), theta),
    )
