"""Command-line front end: ``serrinlab <command> [options]``.

Exit codes: 0 success, 2 invalid input, 3 failed verification.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
from dataclasses import asdict

from . import __version__, constants
from .deviation import boundary_oscillation, deviation_field, select_center
from .errors import SerrinLabError
from .experiments import FamilySpec, default_jobs, fit_to_csv, run_family, stability_report
from .geometry import build_domain, geometric_summary, make_grids
from .identities import check_pointwise, deficits, verify_all
from .torsion import gradient_bound, solve

EXIT_OK, EXIT_INVALID, EXIT_VERIFY = 0, 2, 3
ORDER_RANGE = (8, 4096)

SYMBOLS = {
    "volume": "|Omega|", "surface": "|Gamma|", "diameter": "d_Omega",
    "r_i": "r_i (uniform interior sphere radius)", "r_e": "r_e (exterior; inf if convex)",
    "R": "R = N|Omega|/|Gamma|", "H0": "H_0 = 1/R", "M": "M = max u_nu",
    "rho_i": "rho_i = min |x - z|", "rho_e": "rho_e = max |x - z|", "gap": "rho_e - rho_i",
    "serrin_l1": "||u_nu - R||_{1,Gamma}", "serrin_l2": "||u_nu - R||_{2,Gamma}",
    "sbt_l2": "||H_0 - H||_{2,Gamma}", "sbt_pos": "int (H_0 - H)^+ dS",
    "neg_part_weighted": "int (H_0 - H)^- u_nu^2 dS", "hk": "int dS/H - N|Omega|",
    "one_over_h": "int (1/H - u_nu) dS", "epsilon": "family parameter epsilon",
    "a_i": "ellipsoid semi-axes (columns a_1, a_2, ...)", "c_k": "Fourier radius coefficients",
    "deficit": "selected deficit", "log_deficit": "log(deficit)", "log_gap": "log(rho_e - rho_i)",
    "residual_idwps": "relative residual, int(-u)|hess h|^2 = 1/2 int(R^2 - u_nu^2)h_nu",
    "residual_hfund": "relative residual, fundamental identity with (H_0 - H) u_nu^2",
    "residual_hk": "relative residual, Heintze-Karcher identity",
    "a_Np": "a_{N,p}", "alpha_Np": "alpha_{N,p}", "b0_bound": "b_0 <= d/r_i",
    "L0_bound": "L_0 <= d/min(r_i, delta(z))", "delta_z": "delta_Gamma(z)",
    "delta_z_lower_bound": "r_i^2/(2M)", "c_N": "c_N",
    "M_bound_general": "c_N d (d + r_e)/r_e", "M_bound_convex": "c_N d",
    "trace_factor": "(2/r_i)(1 + N/(r_i mu^2))",
    "feldman_factor": "((M+R)/r_i)(1 + N/(r_i mu^2))",
    "sbt_factor": "R{d + M(M+R)/r_i (1 + N/(r_i mu^2))}",
    "lemma_constant": "C in rho_e - rho_i <= C ||h - h_Omega||_p^{p/(N+p)}",
    "tau_serrin": "tau_N (Serrin)", "tau_sbt": "tau_N (SBT)",
    "N": "N (dimension)", "dim": "N (dimension)", "dimension": "N (dimension)",
    "p": "Lebesgue exponent p", "theta": "theta in (0, 1), tau_N for N >= 4 uses it",
    "tau": "tau_N for the selected deficit", "tau_table": "tau_N by problem and N",
    "mean_convex": "H > 0 on Gamma (sampled)", "estimated": "r_i, r_e sampled, not exact",
    "mean_convex_unverified_constant": "M bound used without a mean-convexity certificate",
    "volume_is_bound": "|Omega| replaced by |B|(d/2)^N", "delta_z_is_bound": "delta_Gamma(z) replaced by its bound",
    "placeholder_k": "k = 1 placeholder in the mu bounds",
    "mu_inverse": "upper bounds on 1/mu (hs_* and bs_* regimes)",
    "mu_inverse_trace": "1/mu used in the trace, Feldman and SBT factors",
    "lemma_constant_geometric": "lemma_constant with M <= c_N d(d + r_e)/r_e",
    "center": "z", "exact_torsion": "u in closed form", "solver_degree": "collocation degree K",
    "boundary_residual": "max |u| on Gamma", "boundary_nodes": "boundary quadrature nodes",
    "volume_nodes": "volume quadrature nodes", "order": "boundary quadrature order",
    "kink_order": "order used where H_0 - H changes sign",
    "idwps": "int(-u)|hess h|^2 = 1/2 int(R^2 - u_nu^2) h_nu",
    "h-fundamental": "fundamental identity with (H_0 - H) u_nu^2",
    "heintze-karcher": "Heintze-Karcher identity", "flux": "int u_nu dS = N|Omega|",
    "minkowski": "int H q_nu dS = |Gamma|",
    "harmonic-flux-grad-h": "int |grad h|^2 u_nu = N int |grad h|^2 + 2 int(-u)|hess h|^2",
    "harmonic-flux": "int v^2 u_nu = N int v^2 + 2 int(-u)|grad v|^2",
    "pointwise_violations": "nodes violating a pointwise inequality",
    "ratio": "deficit-to-gap implied constants", "slope": "fitted exponent",
    "intercept": "fit intercept", "r2": "fit R^2", "rows_used": "rows in the fit",
    "excluded": "rows left out of the fit, with reason",
    "deficit_name": "which deficit the row reports",
    "status": "ok | excluded-residual | noise-floor | solver-failure",
}


def _symbols_epilog() -> str:
    width = max(map(len, SYMBOLS))
    return "column names:\n" + "\n".join(f"  {k:<{width}}  {v}" for k, v in SYMBOLS.items())


class ValidationError(Exception):
    pass


def _order(text: str) -> int:
    n = int(text)
    if not ORDER_RANGE[0] <= n <= ORDER_RANGE[1]:
        raise argparse.ArgumentTypeError(f"order must lie in {list(ORDER_RANGE)}, got {n}")
    return n


def _eps_list(text: str) -> list[float]:
    return [float(s) for s in text.split(",") if s.strip()]


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON file with option defaults (flags override)")
    common.add_argument("--domain", help='inline JSON, e.g. \'{"kind":"ellipsoid","axes":[2,1]}\', or a file path')
    common.add_argument("--boundary-order", type=_order, default=None)
    common.add_argument("--radial-order", type=_order, default=None)
    common.add_argument("--angular-order", type=_order, default=None)
    common.add_argument("--degree", type=int, default=None,
                        help="collocation degree (default: adaptive from 40)")
    common.add_argument("--center", default="argmin",
                        help="argmin | centroid | feldman:x1,x2,...")
    common.add_argument("--theta", type=float, default=constants.DEFAULT_THETA)
    common.add_argument("--p", type=float, default=2.0)
    common.add_argument("--output", "-o", help="write to this file instead of stdout")
    common.add_argument("--format", choices=("table", "csv", "json"), default="table")

    parser = argparse.ArgumentParser(
        prog="serrinlab", description="Numerical checks for Serrin's torsion problem, the "
        "Soap Bubble Theorem and Heintze-Karcher's inequality.",
        epilog=_symbols_epilog(), formatter_class=argparse.RawDescriptionHelpFormatter)
    parser.add_argument("--version", action="version", version=f"serrinlab {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    kw = dict(parents=[common], epilog=_symbols_epilog(),
              formatter_class=argparse.RawDescriptionHelpFormatter)
    sub.add_parser("describe", help="geometry, solver and center summary", **kw)
    sub.add_parser("verify", help="integral identities and pointwise inequalities", **kw)
    sub.add_parser("deficits", help="all deficits of the stability theorems", **kw)
    pc = sub.add_parser("constants", help="closed-form constants", **kw)
    pc.add_argument("--N", type=int)
    pc.add_argument("--d", type=float, help="diameter")
    pc.add_argument("--ri", type=float)
    pc.add_argument("--re", type=float, default=math.inf)
    pc.add_argument("--M", type=float)
    pc.add_argument("--delta", type=float, help="delta_Gamma(z); default r_i^2/(2M)")
    pc.add_argument("--volume", type=float, help="|Omega|; default |B|(d/2)^N")
    pc.add_argument("--surface", type=float)
    pf = sub.add_parser("fit", help="sweep a family and fit the exponent", **kw)
    pf.add_argument("--family", default="ellipse2d", help="ellipse2d | ellipsoid | fourier")
    pf.add_argument("--N", type=int, default=None)
    pf.add_argument("--mode", type=int, default=2)
    pf.add_argument("--eps", type=_eps_list, default=[1e-1, 3e-2, 1e-2, 3e-3, 1e-3])
    pf.add_argument("--deficit", default="serrin-l2",
                    help="serrin-l2 | serrin-l1 | sbt-l2 | sbt-pos | hk | one-over-h")
    pf.add_argument("--jobs", type=int, default=default_jobs())
    sub.add_parser("report", help="full per-domain stability record (JSON)", **kw)
    return parser


def parse_args(argv):
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.config:
        try:
            with open(args.config) as fh:
                cfg = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise ValidationError(f"cannot read config {args.config}: {exc}") from exc
        cfg = {k.replace("-", "_"): v for k, v in cfg.items()}
        cfg.pop("command", None)
        explicit = vars(parser.parse_args(argv))
        defaults = vars(build_parser().parse_args([args.command]))
        for key, value in cfg.items():
            if key not in explicit:
                raise ValidationError(f"unknown config key {key!r}")
            if explicit[key] == defaults.get(key):
                if key == "domain" and not isinstance(value, str):
                    value = json.dumps(value)
                if key == "eps" and isinstance(value, str):
                    value = _eps_list(value)
                setattr(args, key, value)
        for key in ("boundary_order", "radial_order", "angular_order"):
            value = getattr(args, key)
            if value is not None:
                try:
                    setattr(args, key, _order(str(value)))
                except (argparse.ArgumentTypeError, ValueError) as exc:
                    raise ValidationError(f"config {key}: {exc}") from exc
    return args


# ---------------------------------------------------------------- output

def _fmt(value) -> str:
    if isinstance(value, bool) or value is None:
        return str(value)
    if isinstance(value, float):
        return format(value, ".17g")
    return str(value)


def _emit(args, rows: list[tuple[str, object]], payload: dict | None = None) -> str:
    if args.format == "json":
        return json.dumps(payload if payload is not None else dict(rows), indent=2,
                          sort_keys=True, default=_json_default) + "\n"
    if args.format == "csv":
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["name", "value"])
        for k, v in rows:
            w.writerow([k, _fmt(v)])
        return buf.getvalue()
    width = max((len(k) for k, _ in rows), default=0)
    return "".join(f"{k:<{width}}  {_fmt(v)}\n" for k, v in rows)


def _json_default(obj):
    import numpy as np

    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, (np.floating, np.integer, np.bool_)):
        return obj.item()
    if isinstance(obj, float) and math.isinf(obj):
        return "inf"
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def _sanitize(obj):
    """Replace non-finite floats by strings so the JSON is strict."""
    if isinstance(obj, float) and not math.isfinite(obj):
        return str(obj)
    if isinstance(obj, dict):
        return {str(k): _sanitize(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_sanitize(v) for v in obj]
    return obj


def _write(args, text: str) -> None:
    if args.output:
        with open(args.output, "w", newline="") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


# ---------------------------------------------------------------- commands

def _domain(args):
    if not args.domain:
        raise ValidationError("--domain is required for this command")
    try:
        return build_domain(args.domain)
    except (ValueError, OSError, KeyError, TypeError) as exc:
        raise ValidationError(f"invalid domain spec {args.domain!r}: {exc}") from exc


def _setup(args):
    dom = _domain(args)
    fld = solve(dom, args.degree)
    grids = make_grids(dom, args.boundary_order, args.radial_order, args.angular_order)
    summary = geometric_summary(dom, args.boundary_order)
    z = select_center(fld, args.center, grids.volume)
    return dom, fld, grids, summary, z


def cmd_describe(args) -> int:
    dom, fld, grids, summary, z = _setup(args)
    dev = deviation_field(fld, z)
    osc = boundary_oscillation(dev, grids.boundary, summary.r_i)
    rows = [("dimension", dom.dim), *asdict(summary).items(),
            ("exact_torsion", fld.exact), ("solver_degree", getattr(fld, "degree", None)),
            ("boundary_residual", fld.boundary_residual),
            ("M", gradient_bound(fld, grids.boundary).M),
            ("center", ",".join(_fmt(float(c)) for c in z)),
            ("rho_i", osc.rho_i), ("rho_e", osc.rho_e), ("gap", osc.gap),
            ("boundary_nodes", grids.boundary.size), ("volume_nodes", grids.volume.size)]
    _write(args, _emit(args, rows, _sanitize(dict(rows))))
    return EXIT_OK


def cmd_verify(args) -> int:
    dom, fld, grids, summary, z = _setup(args)
    dev = deviation_field(fld, z)
    reports = verify_all(fld, dev, grids, summary)
    violations = check_pointwise(fld, dev, grids, summary)
    rows = []
    for r in reports:
        rows += [(f"{r.name}.lhs", r.lhs), (f"{r.name}.rhs", r.rhs),
                 (f"{r.name}.residual", r.residual), (f"{r.name}.relative", r.relative),
                 (f"{r.name}.passed", r.passed)]
    rows.append(("pointwise_violations", len(violations)))
    payload = {"identities": [r.to_dict() for r in reports],
               "pointwise_violations": [asdict(v) for v in violations]}
    _write(args, _emit(args, rows, _sanitize(payload)))
    ok = all(r.passed for r in reports) and not violations
    if not ok:
        failed = [r.name for r in reports if not r.passed]
        checks = sorted({v.check for v in violations})
        print(f"serrinlab verify: verification failed for {args.domain}: identities {failed}, "
              f"pointwise {checks}", file=sys.stderr)
    return EXIT_OK if ok else EXIT_VERIFY


def cmd_deficits(args) -> int:
    dom = _domain(args)
    fld = solve(dom, args.degree)
    summary = geometric_summary(dom, args.boundary_order)
    from .geometry import boundary_grid

    dr = deficits(fld, boundary_grid(dom, args.boundary_order), summary)
    rows = list(dr.to_dict().items())
    _write(args, _emit(args, rows, _sanitize(dr.to_dict())))
    return EXIT_OK


def cmd_constants(args) -> int:
    summary = None
    M = args.M
    delta = args.delta
    if args.domain:
        dom = _domain(args)
        summary = geometric_summary(dom, args.boundary_order)
        if M is None:
            M = gradient_bound(solve(dom, args.degree)).M
    elif args.N is None or args.d is None or args.ri is None:
        raise ValidationError("constants needs --domain, or --N, --d and --ri")
    for name in ("d", "ri", "M", "delta", "volume", "surface"):
        value = getattr(args, name)
        if value is not None and value <= 0:
            raise ValidationError(f"--{name} must be positive, got {value}")
    if args.p < 1:
        raise ValidationError(f"--p must be >= 1, got {args.p}")
    led = constants.ledger(summary, args.N, args.p, delta, M, d=args.d, r_i=args.ri,
                           r_e=None if summary else args.re, volume=args.volume,
                           surface=args.surface, theta=args.theta)
    data = asdict(led)
    rows = []
    for k, v in data.items():
        if isinstance(v, dict):
            for k2, v2 in v.items():
                if isinstance(v2, dict):
                    rows += [(f"{k}.{k2}.{k3}", v3) for k3, v3 in v2.items()]
                else:
                    rows.append((f"{k}.{k2}", v2))
        else:
            rows.append((k, v))
    _write(args, _emit(args, rows, _sanitize(data)))
    return EXIT_OK


def cmd_fit(args) -> int:
    family = args.family.lower()
    N = args.N if args.N is not None else 2
    if family == "ellipse2d" and N != 2:
        raise ValidationError("family ellipse2d is planar; use --family ellipsoid with --N")
    spec = FamilySpec(kind=family, N=N, eps=tuple(args.eps), mode=args.mode,
                      center=args.center, deficit=args.deficit,
                      boundary_order=args.boundary_order, radial_order=args.radial_order,
                      angular_order=args.angular_order, degree=args.degree, theta=args.theta)
    fit = run_family(spec, jobs=max(1, args.jobs))
    if args.format == "json":
        text = json.dumps(_sanitize(fit.to_dict()), indent=2, sort_keys=True) + "\n"
    elif args.format == "csv":
        text = fit_to_csv(spec, fit)
    else:
        rows = [("deficit", fit.deficit), ("N", fit.N), ("tau", fit.tau),
                ("slope", fit.slope), ("intercept", fit.intercept), ("r2", fit.r2),
                ("rows_used", fit.used)]
        rows += [(f"excluded[{_fmt(e)}]", s) for e, s in fit.excluded]
        text = _emit(args, rows)
    _write(args, text)
    return EXIT_OK


def cmd_report(args) -> int:
    dom = _domain(args)
    rep = stability_report(dom, args.center, args.boundary_order, args.radial_order,
                           args.angular_order, args.degree, args.p, args.theta)
    text = json.dumps(_sanitize(rep), indent=2, sort_keys=True, default=_json_default) + "\n"
    if args.format != "json":
        rows = [("gap", rep["gap"]), ("rho_i", rep["rho_i"]), ("rho_e", rep["rho_e"]),
                ("M", rep["M"])]
        rows += [(k, v) for k, v in rep["deficits"].items()]
        rows += [(f"ratio.{k}", v) for k, v in rep["ratios"].items()]
        rows += [(f"{r['name']}.relative", r["relative"]) for r in rep["identities"]]
        rows.append(("pointwise_violations", len(rep["pointwise_violations"])))
        text = _emit(args, rows)
    _write(args, text)
    return EXIT_OK


COMMANDS = {"describe": cmd_describe, "verify": cmd_verify, "deficits": cmd_deficits,
            "constants": cmd_constants, "fit": cmd_fit, "report": cmd_report}


def main(argv=None) -> int:
    try:
        args = parse_args(argv)
    except SystemExit as exc:  # argparse reports its own usage errors
        code = exc.code if isinstance(exc.code, int) else EXIT_INVALID
        return EXIT_INVALID if code not in (0,) else EXIT_OK
    except ValidationError as exc:
        print(f"serrinlab: {exc}", file=sys.stderr)
        return EXIT_INVALID
    try:
        return COMMANDS[args.command](args)
    except ValidationError as exc:
        print(f"serrinlab {args.command}: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except (SerrinLabError, ValueError) as exc:
        print(f"serrinlab {args.command}: {type(exc).__name__} for domain "
              f"{getattr(args, 'domain', None)}: {exc}", file=sys.stderr)
        return EXIT_INVALID


def main_entry() -> None:
    """Console-script wrapper that turns the return code into the exit status."""
    sys.exit(main())


if __name__ == "__main__":  # pragma: no cover
    main_entry()
