"""Command-line front end.

Subcommands: check-drift, table, classify, price, sample. Floats are
written with 17 significant digits and +inf as the token ``inf``. Exit codes:
0 success, 1 mathematical refusal or counterexample, 2 input error,
3 numerical non-convergence.
"""

from __future__ import annotations

import argparse
import io
import json
import math
import sys

import numpy as np

from . import scaling
from .dinverse import DInverse
from .drift import DriftFunction, verify_condition_A
from .errors import (
    ClassificationError,
    ConditionViolated,
    DegenerateTimeChangeError,
    DomainError,
    EvaluationError,
    InconsistencyError,
    NotDIncreasingError,
)
from .finance import GBMSpec, MC_PATHS, call_price_monotonicity, tabulated_coefficient
from .montecarlo import DEFAULT_SEED, law_check, parallel_draws
from .numerics import MONOTONE_TOL, log_grid

EXIT_OK, EXIT_REFUSED, EXIT_INPUT, EXIT_NUMERIC = 0, 1, 2, 3

DRIFT_FORMS = {
    "zero": (),
    "constant": ("c",),
    "power": ("c", "alpha"),
    "power_exp": ("c", "alpha", "b"),
    "explosion": ("t0",),
}
TOL_KEYS = {"monotone": MONOTONE_TOL, "ks_alpha": 0.01, "price_tol": 1e-9}
CONFIG_KEYS = set(DRIFT_FORMS) | {
    "csv", "interp", "x", "t", "u", "n", "seed", "threads", "method", "format", "out",
    "tol", "phi1", "phi2", "fixture", "s0", "sigma", "mu", "K", "paths",
}
FIXTURES = {
    "power": scaling.power_fixture,
    "explosion": scaling.explosion_fixture,
    "zero": scaling.zero_fixture,
    "degenerate": scaling.degenerate_fixture,
}


class InputError(Exception):
    pass


def fmt(v):
    """17-significant-digit float text; +inf is ``inf``."""
    v = float(v)
    if math.isinf(v):
        return "inf" if v > 0 else "-inf"
    if math.isnan(v):
        return "nan"
    return "%.17g" % v


def to_json(obj):
    """JSON text with floats at 17 digits and non-finite floats as strings."""
    if isinstance(obj, dict):
        return "{" + ", ".join(f"{json.dumps(str(k))}: {to_json(v)}" for k, v in obj.items()) + "}"
    if isinstance(obj, (list, tuple, np.ndarray)):
        return "[" + ", ".join(to_json(v) for v in obj) + "]"
    if isinstance(obj, (bool, np.bool_)) or obj is None:
        return json.dumps(None if obj is None else bool(obj))
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        s = fmt(obj)
        return s if math.isfinite(obj) else json.dumps(s)
    return json.dumps(str(getattr(obj, "value", obj)))


def parse_kv(items, allowed, what):
    """``["c=1", "alpha=2"]`` or a dict -> {name: float}, rejecting unknown names."""
    if isinstance(items, dict):
        pairs = list(items.items())
    else:
        pairs = []
        for it in items or ():
            if "=" not in it:
                raise InputError(f"{what}: expected key=value, got {it!r}")
            k, v = it.split("=", 1)
            pairs.append((k.strip(), v))
    out = {}
    for k, v in pairs:
        if k not in allowed:
            raise InputError(f"{what}: unknown parameter {k!r} (allowed: {', '.join(allowed) or 'none'})")
        try:
            out[k] = float(v)
        except (TypeError, ValueError):
            raise InputError(f"{what}: {k}={v!r} is not a number") from None
    missing = [k for k in allowed if k not in out]
    if missing:
        raise InputError(f"{what}: missing {', '.join(missing)}")
    return out


def parse_grid(spec, what="grid"):
    """``lo:hi:n`` (log-spaced), ``a,b,c`` or a list of numbers."""
    try:
        if isinstance(spec, (list, tuple)):
            vals = [float(v) for v in spec]
        elif ":" in str(spec):
            lo, hi, n = str(spec).split(":")
            return log_grid(float(lo), float(hi), int(n))
        else:
            vals = [float(v) for v in str(spec).split(",") if v.strip()]
    except (TypeError, ValueError):
        raise InputError(f"cannot parse {what} {spec!r}") from None
    if not vals:
        raise InputError(f"empty {what}")
    return np.asarray(vals, dtype=float)


def build_drift(args) -> DriftFunction:
    chosen = [k for k in (*DRIFT_FORMS, "csv") if getattr(args, k, None) not in (None, False)]
    if len(chosen) != 1:
        raise InputError("give exactly one drift: --zero, --constant, --power, --power-exp, --explosion or --csv")
    kind = chosen[0]
    if kind == "csv":
        return DriftFunction.from_csv(args.csv, mode=args.interp or "step")
    if kind == "zero":
        return DriftFunction.zero()
    p = parse_kv(getattr(args, kind), DRIFT_FORMS[kind], f"--{kind.replace('_', '-')}")
    if kind == "constant":
        return DriftFunction.constant(p["c"])
    if kind == "power":
        return DriftFunction.power(p["c"], p["alpha"])
    if kind == "explosion":
        return DriftFunction.explosive(p["t0"])
    c, a, b = p["c"], p["alpha"], p["b"]
    if c <= 0 or a < 0 or b < 0:
        raise InputError("--power-exp needs c > 0, alpha >= 0, b >= 0")
    return DriftFunction.custom(
        lambda t: c * np.power(t, a) * np.exp(-b / np.asarray(t, dtype=float)),
        log_func=lambda t: math.log(c) + a * np.log(t) - b / np.asarray(t, dtype=float),
        label=f"{c:g}*t^{a:g}*exp(-{b:g}/t)",
    )


def parse_scaling_fn(spec, what):
    """``power a= k=``, ``exp a= b= k=`` or ``csv=path`` (header lam,value)."""
    if isinstance(spec, dict):
        spec = [spec.get("form", "")] + [f"{k}={v}" for k, v in spec.items() if k != "form"]
    if not spec:
        raise InputError(f"{what}: empty scaling function")
    head, rest = spec[0], list(spec[1:])
    if head.startswith("csv="):
        path = head.split("=", 1)[1]
        try:
            data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
        except (OSError, ValueError) as exc:
            raise InputError(f"{what}: cannot read {path}: {exc}") from None
        return scaling.ScalingFn.tabulated(data[:, 0], data[:, 1])
    if head == "power":
        return scaling.ScalingFn.power(**parse_kv(rest, ("a", "k"), what))
    if head == "exp":
        return scaling.ScalingFn.exp(**parse_kv(rest, ("a", "b", "k"), what))
    raise InputError(f"{what}: unknown form {head!r} (power, exp, csv=path)")


def parse_coefficient(v, what):
    if isinstance(v, dict):
        if set(v) != {"t", "value"}:
            raise InputError(f"{what}: tabulated coefficient needs exactly keys 't' and 'value'")
        return tabulated_coefficient(v["t"], v["value"])
    try:
        return float(v)
    except (TypeError, ValueError):
        raise InputError(f"{what}: expected a number or a {{t, value}} table") from None


class Output:
    """Single writer for CSV (``# key=value`` metadata) or column-oriented JSON."""

    def __init__(self, command, fmt_name):
        self.command = command
        self.format = fmt_name
        self.meta = {}
        self.tables = []
        self.trailer = {}

    def table(self, name, columns):
        cols = {c: [] for c in columns}
        self.tables.append((name, cols))
        return cols

    def render(self):
        if self.format == "json":
            doc = {"command": self.command, "meta": self.meta}
            for name, cols in self.tables:
                doc[name] = cols
            doc.update(self.trailer)
            return to_json(doc) + "\n"
        buf = io.StringIO()
        for k, v in self.meta.items():
            buf.write(f"# {k}={_text(v)}\n")
        for i, (name, cols) in enumerate(self.tables):
            if i:
                buf.write(f"# table={name}\n")
            buf.write(",".join(cols) + "\n")
            for row in zip(*cols.values()):
                buf.write(",".join(_text(v) for v in row) + "\n")
        for k, v in self.trailer.items():
            buf.write(f"# {k}={_text(v)}\n")
        return buf.getvalue()


def _text(v):
    if isinstance(v, (float, np.floating)):
        return fmt(v)
    if isinstance(v, (list, tuple)):
        return "[" + " ".join(_text(x) for x in v) + "]"
    return str(getattr(v, "value", v))


def cmd_check_drift(args, out, tol):
    drift = build_drift(args)
    v = verify_condition_A(drift, tol=tol["monotone"])
    out.meta["drift"] = drift.describe()
    out.trailer["verdict"] = "Satisfied" if v.holds else "Violated"
    if not v.holds:
        out.trailer["witness_t"] = list(map(float, v.witness))
        out.trailer["witness_ratio"] = list(map(float, v.values))
    return EXIT_OK if v.holds else EXIT_REFUSED


def cmd_table(args, out, tol):
    drift = build_drift(args)
    x = float(args.x if args.x is not None else 0.0)
    law = DInverse(drift, x)
    t = parse_grid(args.t if args.t is not None else "1e-2:1e2:9", "time grid")
    out.meta.update({"drift": drift.describe(), "x": x, "defect_mass": float(law.defect_mass())})
    cols = out.table("rows", ("t", "cdf"))
    cols["t"] = [float(v) for v in t]
    cols["cdf"] = [float(v) for v in np.atleast_1d(law.cdf(t))]
    if args.u is not None:
        u = parse_grid(args.u, "probability grid")
        q = out.table("quantiles", ("u", "quantile"))
        q["u"] = [float(v) for v in u]
        q["quantile"] = [float(v) for v in np.atleast_1d(law.quantile(u))]
    return EXIT_OK


def cmd_classify(args, out, tol):
    if args.fixture is not None:
        if args.fixture not in FIXTURES:
            raise InputError(f"unknown fixture {args.fixture!r} ({', '.join(FIXTURES)})")
        family = FIXTURES[args.fixture]()
    else:
        if args.phi1 is None:
            raise InputError("classify needs --fixture or a drift with --phi1 (and optionally --phi2)")
        phi2 = parse_scaling_fn(args.phi2, "--phi2") if args.phi2 is not None else scaling.ScalingFn.power(1.0, 0.5)
        family = scaling.ScalingFamily(build_drift(args), parse_scaling_fn(args.phi1, "--phi1"), phi2)
    report = scaling.classify(family)
    out.meta["drift"] = family.drift.describe()
    out.trailer.update(report.as_dict())
    if out.format == "csv":
        prof = out.trailer.pop("g_profile")
        cols = out.table("profile", ("t", "g", "state"))
        cols.update(prof)
    return EXIT_OK


def cmd_price(args, out, tol):
    s0 = float(args.s0 if args.s0 is not None else 1.0)
    sigma = parse_coefficient(args.sigma if args.sigma is not None else 1.0, "sigma")
    mu = parse_coefficient(args.mu if args.mu is not None else 0.0, "mu")
    if args.K is None:
        raise InputError("price needs a strike --K")
    K = float(args.K)
    spec = GBMSpec(s0, sigma, mu)
    t = parse_grid(args.t if args.t is not None else "1e-2:1e2:9", "maturity grid")
    seed = int(args.seed if args.seed is not None else DEFAULT_SEED)
    from .montecarlo import make_rng

    n = int(args.paths if args.paths is not None else MC_PATHS)
    curve = call_price_monotonicity(spec, K, t, make_rng(seed), n, tol=tol["price_tol"])
    out.meta.update({"s0": s0, "K": K, "method": curve.method})
    if curve.method != "closed":
        out.meta.update({"seed": seed, "paths": n})
    cols = out.table("rows", ("t", "price", "stderr"))
    cols["t"] = [float(v) for v in curve.t]
    cols["price"] = [float(v) for v in curve.price]
    cols["stderr"] = [float(v) for v in curve.stderr]
    out.trailer["verdict"] = curve.label
    if not curve.verdict.holds:
        out.trailer["witness_t"] = list(curve.verdict.witness)
    return EXIT_OK if curve.verdict.holds else EXIT_REFUSED


def cmd_sample(args, out, tol):
    drift = build_drift(args)
    x = float(args.x if args.x is not None else 0.0)
    n = int(args.n if args.n is not None else 1000)
    seed = int(args.seed if args.seed is not None else DEFAULT_SEED)
    threads = int(args.threads if args.threads is not None else 1)
    method = args.method or "closed"
    if n <= 0 or threads <= 0:
        raise InputError("--n and --threads must be positive")
    law = DInverse(drift, x)
    ys = parallel_draws(lambda rng, size: law.sample(rng, size, method=method), n, seed, threads)
    out.meta.update({"drift": drift.describe(), "x": x, "n": n, "seed": seed, "method": method})
    out.table("samples", ("y",))["y"] = [float(v) for v in ys]
    out.trailer["defect_fraction"] = float(np.mean(np.isinf(ys)))
    out.trailer["defect_mass"] = float(law.defect_mass())
    try:
        chk = law_check(law, ys, tol["ks_alpha"])
    except DomainError:
        out.trailer["ks"] = "undefined"
    else:
        out.trailer.update({"ks": chk.ks, "ks_critical": chk.critical,
                            "ks_result": "PASS" if chk.passed else "FAIL"})
    return EXIT_OK


COMMANDS = {
    "check-drift": cmd_check_drift,
    "table": cmd_table,
    "classify": cmd_classify,
    "price": cmd_price,
    "sample": cmd_sample,
}


def _add_drift_flags(p):
    g = p.add_argument_group("drift")
    g.add_argument("--zero", action="store_true", default=None, help="rho = 0")
    g.add_argument("--constant", nargs="+", metavar="c=", help="rho(t) = c t")
    g.add_argument("--power", nargs="+", metavar="KEY=VAL", help="rho(t) = c t^alpha (c= alpha=)")
    g.add_argument("--power-exp", dest="power_exp", nargs="+", metavar="KEY=VAL",
                   help="rho(t) = c t^alpha exp(-b/t) (c= alpha= b=)")
    g.add_argument("--explosion", nargs="+", metavar="t0=", help="explodes to +inf at t0")
    g.add_argument("--csv", help="tabulated drift, columns t,rho")
    g.add_argument("--interp", choices=("step", "linear"), help="interpolation for --csv (default step)")


def build_parser():
    parser = argparse.ArgumentParser(prog="dinv", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", help="JSON file with parameters; explicit flags win")
        p.add_argument("--format", choices=("csv", "json"))
        p.add_argument("--out", help="output file (default stdout)")
        p.add_argument("--tol", nargs="+", metavar="KEY=VAL",
                       help=f"tolerance overrides: {', '.join(TOL_KEYS)}")
        if name in ("check-drift", "table", "sample", "classify"):
            _add_drift_flags(p)
        if name in ("table", "sample"):
            p.add_argument("--x", type=float, help="level (default 0)")
        if name in ("table", "price"):
            p.add_argument("--t", help="time grid: lo:hi:n (log) or a,b,c")
        if name == "table":
            p.add_argument("--u", help="probabilities for a quantile table")
        if name in ("sample", "price"):
            p.add_argument("--seed", type=int, help=f"generator seed (default {DEFAULT_SEED})")
        if name == "sample":
            p.add_argument("--n", type=int, help="number of draws (default 1000)")
            p.add_argument("--threads", type=int, help="worker threads (output does not depend on it)")
            p.add_argument("--method", choices=("closed", "generic"))
        if name == "classify":
            p.add_argument("--fixture", help=f"built-in family: {', '.join(FIXTURES)}")
            p.add_argument("--phi1", nargs="+", help="power a= k= | exp a= b= k= | csv=path")
            p.add_argument("--phi2", nargs="+", help="as --phi1 (default power a=1 k=0.5)")
        if name == "price":
            p.add_argument("--s0", type=float)
            p.add_argument("--sigma", type=float)
            p.add_argument("--mu", type=float)
            p.add_argument("--K", type=float)
            p.add_argument("--paths", type=int, help=f"Monte Carlo paths (default {MC_PATHS})")
    return parser


def apply_config(args, path):
    try:
        with open(path) as fh:
            cfg = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise InputError(f"cannot read config {path}: {exc}") from None
    if not isinstance(cfg, dict):
        raise InputError("config must be a JSON object")
    unknown = set(cfg) - CONFIG_KEYS
    if unknown:
        raise InputError(f"unknown config keys: {', '.join(sorted(unknown))}")
    for k, v in cfg.items():
        if not hasattr(args, k):
            raise InputError(f"config key {k!r} does not apply to {args.command}")
        if getattr(args, k) is None:
            setattr(args, k, v)


def run(argv=None, stdout=None):
    stdout = stdout or sys.stdout
    args = build_parser().parse_args(argv)
    fmt_name = "json" if args.command == "classify" else "csv"
    try:
        if args.config:
            apply_config(args, args.config)
        if args.format:
            fmt_name = args.format
        tol = dict(TOL_KEYS)
        tol.update(_tol_items(args.tol))
        out = Output(args.command, fmt_name)
        code = COMMANDS[args.command](args, out, tol)
    except ClassificationError as exc:
        out = Output(args.command, "json")
        out.trailer.update({"error": str(exc), "profile": exc.profile})
        _emit(out, args, stdout)
        return EXIT_NUMERIC
    except (ConditionViolated, NotDIncreasingError) as exc:
        print(f"refused: {exc}", file=sys.stderr)
        return EXIT_REFUSED
    except (EvaluationError, InconsistencyError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (InputError, DomainError, DegenerateTimeChangeError, OSError, ValueError) as exc:
        print(f"input error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    _emit(out, args, stdout)
    return code


def _tol_items(items):
    if not items:
        return {}
    if isinstance(items, dict):
        items = [f"{k}={v}" for k, v in items.items()]
    out = {}
    for it in items:
        k, _, v = str(it).partition("=")
        if k not in TOL_KEYS:
            raise InputError(f"--tol: unknown key {k!r} (allowed: {', '.join(TOL_KEYS)})")
        try:
            out[k] = float(v)
        except ValueError:
            raise InputError(f"--tol: {it!r} is not key=number") from None
    return out


def _emit(out, args, stdout):
    text = out.render()
    if args.out:
        with open(args.out, "w", newline="") as fh:
            fh.write(text)
    else:
        stdout.write(text)


def main(argv=None):
    sys.exit(run(argv))


if __name__ == "__main__":
    main()
