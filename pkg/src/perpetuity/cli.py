"""Command-line experiment runner.

Exit codes: 0 pass, 1 verdict failed, 2 usage or config error, 3 numeric failure.
"""

from __future__ import annotations

import argparse
import math
import sys
from pathlib import Path

import numpy as np

from . import chernoff, engine, equiv, survpath, tables
from .mlaw import MLaw, parse_law
from .numerics import QuadratureError, RootBracketError

EXIT_PASS, EXIT_FAIL, EXIT_USAGE, EXIT_NUMERIC = 0, 1, 2, 3
REQUIRED = {"simulate": ("law",), "verify": ("law",), "bracket": ("law",),
            "curves": ("law",), "equiv": ("mu", "nu")}


class UsageError(Exception):
    pass


# ------------------------------------------------------------------ config


def read_config(path) -> dict:
    """Flat ``key = value`` lines; ``#`` starts a comment."""
    out = {}
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise UsageError(f"cannot read config {path}: {exc}") from exc
    for num, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        if not sep or not key.strip():
            raise UsageError(f"{path}:{num}: expected key=value, got {raw!r}")
        out[key.strip().replace("-", "_")] = value.strip()
    return out


def _apply_config(parser: argparse.ArgumentParser, sub: argparse.ArgumentParser, config: dict):
    """Turn config entries into parser defaults so explicit flags still win."""
    actions = {a.dest: a for p in (parser, sub) for a in p._actions if a.dest != "help"}
    for key, value in config.items():
        if key in ("config", "command"):
            continue
        action = actions.get(key)
        if action is None:
            raise UsageError(f"unknown config key {key!r}")
        try:
            typed = action.type(value) if action.type else value
        except (TypeError, ValueError) as exc:
            raise UsageError(f"bad value for {key}: {value!r}") from exc
        # global flags live on the top-level parser; the subcommand copies suppress theirs
        owner = parser if any(a.dest == key for a in parser._actions) else sub
        owner.set_defaults(**{key: typed})


# ------------------------------------------------------------------- grids


def positive_float(text):
    v = float(text)
    if not v > 0:
        raise argparse.ArgumentTypeError(f"must be positive: {text}")
    return v


def positive_int(text):
    v = int(text)
    if v < 1:
        raise argparse.ArgumentTypeError(f"must be a positive integer: {text}")
    return v


def float_list(text):
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from exc


def b_value(text):
    return None if text.strip().upper() == "AUTO" else positive_float(text)


def x_grid(args) -> np.ndarray:
    if args.x_scale == "log":
        return np.geomspace(args.x_min, args.x_max, args.x_count)
    return np.linspace(args.x_min, args.x_max, args.x_count)


def curve_grid(n_points: int) -> np.ndarray:
    """Points inside (0, 1): uniform, plus geometric refinement toward both ends."""
    n_edge = max(n_points // 8, 2)
    uniform = np.linspace(0.0, 1.0, n_points)[1:-1]
    near = np.geomspace(1e-12, 1e-2, n_edge)
    return np.unique(np.concatenate([near, uniform, 1.0 - near]))


# ---------------------------------------------------------------- commands


def _law(args) -> MLaw:
    try:
        return parse_law(args.law)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc


def _out(args, name) -> Path:
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    return out / name


def cmd_simulate(args) -> int:
    cfg = engine.PerpetuityConfig(args.q, _law(args), args.depth, args.n_paths, args.seed, args.r0)
    ens = engine.ensemble(cfg, threads=args.threads)
    tables.write_csv(_out(args, "samples.csv"), ["R"], [ens.samples])
    summary = ens.summary()
    summary.update(law=cfg.law.spec(), q=cfg.q, depth=cfg.depth, seed=cfg.seed, r0=cfg.r0)
    tables.write_json(_out(args, "summary.json"), summary)
    print(tables.dumps(summary))
    return EXIT_PASS


def _certificate(args, law):
    """Run the iteration check; ``B = AUTO`` searches the B-grid."""
    setup = survpath.default_setup(law, args.q) if args.phi is None else None
    phi = chernoff.parse_phi(args.phi) if args.phi else setup.phi
    z0 = args.z0 if args.z0 is not None else (setup.z0 if setup else 1.0)
    zs = chernoff.z_grid(z0, args.z_count, args.z_span)
    B = args.B if args.B is not None or setup is None else setup.B
    if args.B_auto or B is None:
        b_grid = np.geomspace(args.B_min, args.B_max, args.B_count)
        found, report = chernoff.find_min_B(law, args.q, phi, zs, b_grid)
        if found is None:
            print(f"no B in [{args.B_min:g}, {args.B_max:g}] certifies {phi.spec()} on "
                  f"z in [{zs[0]:g}, {zs[-1]:g}]", file=sys.stderr)
    else:
        report = chernoff.verify_iteration(law, args.q, phi, B, zs)
    tables.write_csv(_out(args, "bound_report.csv"), ["z", "lhs_log", "rhs_log", "margin"],
                     list(zip(*report.rows())))
    status = "pass" if report.passed else "fail"
    print(f"{report.kind}: {phi.spec()} B={report.B:.17g} z0={zs[0]:g} "
          f"min margin={report.margin.min():.6g} at z={report.worst_z:.6g} -> {status}")
    return report, setup


def cmd_verify(args) -> int:
    report, _ = _certificate(args, _law(args))
    return EXIT_PASS if report.passed else EXIT_FAIL


def cmd_bracket(args) -> int:
    law = _law(args)
    if args.phi and not args.normalizer:
        raise UsageError("--normalizer is required with a custom --phi")
    norm = survpath.parse_normalizer(args.normalizer) if args.normalizer else None
    report, setup = _certificate(args, law)
    if not report.passed:
        print("certificate failed; no tail curve written", file=sys.stderr)
        return EXIT_FAIL
    norm = norm or setup.normalizer
    xs = x_grid(args)
    tail = None
    if args.n_paths > 0:
        cfg = engine.PerpetuityConfig(args.q, law, args.depth, args.n_paths, args.seed)
        tail = engine.empirical_log_tail(engine.ensemble(cfg, threads=args.threads).samples, xs)
    c_grid = np.geomspace(*args.c_grid[:2], int(args.c_grid[2]))
    curve = survpath.tail_ratio_curve(law, args.q, xs, report, norm, c_grid, tail)
    cols, data = curve.columns()
    tables.write_csv(_out(args, "tail_curve.csv"), cols, data)
    print(f"normalizer {norm.label()}: upper_ratio {curve.upper_ratio[0]:.6g} -> "
          f"{curve.upper_ratio[-1]:.6g}, lower_ratio {curve.lower_ratio[0]:.6g} -> "
          f"{curve.lower_ratio[-1]:.6g}")
    return EXIT_PASS


def cmd_curves(args) -> int:
    law = _law(args)
    if not law.continuous:
        raise UsageError(f"{law.spec()} has no density")
    t = curve_grid(args.n_points)
    with np.errstate(over="ignore", under="ignore"):
        dens = np.exp(law.log_density(t))
    cdf = law.cdf_sorted(t)
    tables.write_csv(_out(args, "density.csv"), ["t", "density"], [t, dens])
    tables.write_csv(_out(args, "cdf.csv"), ["t", "cdf"], [t, cdf])
    mass = float(np.trapezoid(dens, t))
    print(f"{law.spec()}: {t.size} points, trapezoid mass {mass:.12g}, "
          f"cdf monotone {bool(np.all(np.diff(cdf) >= 0))}")
    return EXIT_PASS


def cmd_equiv(args) -> int:
    try:
        mu, nu = parse_law(args.mu), parse_law(args.nu)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    rep = equiv.check_equivalence(mu, nu, args.epsilon, args.n_grid)
    tables.write_csv(_out(args, "equiv.csv"), ["delta", "mu_tail", "nu_tail", "ratio"],
                     list(zip(*rep.rows())))
    print(f"{mu.spec()} vs {nu.spec()}: d={rep.d_hat:.6g} D={rep.D_hat:.6g} "
          f"({rep.reason}) -> {'pass' if rep.passed else 'fail'}")
    return EXIT_PASS if rep.passed else EXIT_FAIL


def cmd_c0(args) -> int:
    r = args.r
    if not r > 1:
        raise UsageError("r must exceed 1")
    c0 = survpath.c0_root(r)
    rs = r / (r - 1.0)
    info = {
        "r": r,
        "r_star": rs,
        "c0": c0,
        "lower_constant": survpath.weibull_lower_constant(r, c0),
        "r_log_one_minus_inv_r": r * math.log1p(-1.0 / r),
        "c0_times_r": c0 * r,
        "one_minus_c0_times_rstar_log_rstar": (1.0 - c0) * rs * math.log(rs),
    }
    tables.write_json(_out(args, "c0.json"), info)
    print(f"c0 = {c0:.17g}")
    print(tables.dumps(info))
    return EXIT_PASS


def cmd_hosp(args) -> int:
    ys = np.array(sorted(args.y))
    ratios = np.array([survpath.hosp_ratio(y) for y in ys])
    err = np.abs(ratios + 1.0)
    tables.write_csv(_out(args, "hosp.csv"), ["y", "ratio", "abs_err"], [ys, ratios, err])
    for y, v in zip(ys, ratios):
        print(f"y={y:g} ratio={v:.17g}")
    ok = bool(np.all(ratios < 0) and np.all(np.diff(err) <= 0))
    return EXIT_PASS if ok else EXIT_FAIL


# ------------------------------------------------------------------ parser


def _add_law(p):
    p.add_argument("--law", default=None, help="multiplier law, e.g. beta:a=1,b=2 or weibull:r=2")
    p.add_argument("--q", type=positive_float, default=1.0)


def _add_certificate(p):
    p.add_argument("--phi", default=None,
                   help="explinear:b=, exppower:b=,eta=, power:r= or zlogz (default: matched to the law)")
    p.add_argument("--B", type=b_value, default=None, help="float or AUTO")
    p.add_argument("--B-auto", dest="B_auto", action="store_true")
    p.add_argument("--B-min", dest="B_min", type=positive_float, default=1.0)
    p.add_argument("--B-max", dest="B_max", type=positive_float, default=1e3)
    p.add_argument("--B-count", dest="B_count", type=positive_int, default=61)
    p.add_argument("--z0", type=positive_float, default=None)
    p.add_argument("--z-count", dest="z_count", type=positive_int, default=64)
    p.add_argument("--z-span", dest="z_span", type=positive_float, default=100.0)


GLOBAL_DEFAULTS = {"seed": 0, "out_dir": ".", "threads": 1, "config": None}


def _add_globals(p, defaults):
    # separate action objects per parser: argparse parents share them, and a
    # default set on one would leak into the others
    p.add_argument("--seed", type=int, default=defaults.get("seed", argparse.SUPPRESS))
    p.add_argument("--out-dir", dest="out_dir", default=defaults.get("out_dir", argparse.SUPPRESS))
    p.add_argument("--threads", type=positive_int, default=defaults.get("threads", argparse.SUPPRESS))
    p.add_argument("--config", default=defaults.get("config", argparse.SUPPRESS))


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    _add_globals(common, {})

    parser = argparse.ArgumentParser(prog="perpetuity", description="Perpetuity tail experiments.")
    _add_globals(parser, GLOBAL_DEFAULTS)
    subs = parser.add_subparsers(dest="command", required=True)

    p = subs.add_parser("simulate", parents=[common], help="Monte Carlo ensemble")
    _add_law(p)
    p.add_argument("--depth", type=positive_int, default=400)
    p.add_argument("--n-paths", dest="n_paths", type=positive_int, default=10000)
    p.add_argument("--r0", type=float, default=0.0)
    p.set_defaults(func=cmd_simulate)

    p = subs.add_parser("verify", parents=[common], help="certify the iteration inequality")
    _add_law(p)
    _add_certificate(p)
    p.set_defaults(func=cmd_verify)

    p = subs.add_parser("bracket", parents=[common], help="lower/upper tail bounds on an x-grid")
    _add_law(p)
    _add_certificate(p)
    p.add_argument("--normalizer", default=None, help="XLOGX, XLOGX_ETA(eta), POWER(r*) or EXP(B)")
    p.add_argument("--x-min", dest="x_min", type=positive_float, default=10.0)
    p.add_argument("--x-max", dest="x_max", type=positive_float, default=1e6)
    p.add_argument("--x-count", dest="x_count", type=positive_int, default=16)
    p.add_argument("--x-scale", dest="x_scale", choices=("lin", "log"), default="log")
    p.add_argument("--c-grid", dest="c_grid", type=float_list, default=[1e-3, 1 - 1e-3, 48],
                   help="min,max,count of the geometric c-grid")
    p.add_argument("--n-paths", dest="n_paths", type=int, default=0,
                   help="paths for the empirical column (0 = none)")
    p.add_argument("--depth", type=positive_int, default=400)
    p.set_defaults(func=cmd_bracket)

    p = subs.add_parser("curves", parents=[common], help="density and cdf tables")
    p.add_argument("--law", default=None)
    p.add_argument("--n-points", dest="n_points", type=positive_int, default=20001)
    p.set_defaults(func=cmd_curves)

    p = subs.add_parser("equiv", parents=[common], help="equivalence at 1 of two laws")
    p.add_argument("--mu", default=None)
    p.add_argument("--nu", default=None)
    p.add_argument("--epsilon", type=positive_float, default=0.1)
    p.add_argument("--n-grid", dest="n_grid", type=positive_int, default=61)
    p.set_defaults(func=cmd_equiv)

    p = subs.add_parser("c0", parents=[common], help="optimal constant c0 for the Weibull-like family")
    p.add_argument("--r", type=float, default=2.0)
    p.set_defaults(func=cmd_c0)

    p = subs.add_parser("hosp", parents=[common], help="thin-tail integral ratio on a y-grid")
    p.add_argument("--y", type=float_list, default=[5.0, 7.5, 11.0, 17.0, 25.0])
    p.set_defaults(func=cmd_hosp)
    return parser


def parse(argv):
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.config:
        sub = parser._subparsers._group_actions[0].choices[args.command]
        _apply_config(parser, sub, read_config(args.config))
        args = parser.parse_args(argv)
    return args


def main(argv=None) -> int:
    try:
        args = parse(sys.argv[1:] if argv is None else argv)
        if hasattr(args, "c_grid") and len(args.c_grid) != 3:
            raise UsageError("--c-grid takes min,max,count")
        for name in REQUIRED.get(args.command, ()):
            if getattr(args, name) is None:
                raise UsageError(f"--{name} is required (flag or config key)")
        return args.func(args)
    except SystemExit as exc:  # argparse reports usage errors this way
        return EXIT_USAGE if exc.code not in (0, None) else EXIT_PASS
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (QuadratureError, RootBracketError, chernoff.TruncatedConjugate, FloatingPointError) as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except ValueError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
