"""Command line entry point: ``sinet build|eval|verify|rate|report``.

Exit status is 0 when every requested check passes, 1 when a bound or budget
check fails and 2 for usage errors.
"""

from __future__ import annotations

import argparse
import inspect
import json
import math
import os
import sys
from fractions import Fraction
from pathlib import Path

import numpy as np

from . import bits, gadgets, harness, interp, netcore, sis, splines

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2


class UsageError(Exception):
    pass


def _frac(text: str) -> Fraction:
    try:
        return Fraction(text)
    except (ValueError, ZeroDivisionError) as exc:
        raise argparse.ArgumentTypeError(f"not a number: {text!r}") from exc


def _levels(text: str) -> list[int]:
    try:
        return [int(v) for v in text.split(",") if v.strip()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"bad level list {text!r}") from exc


def _write_net(net: netcore.ReluNet, out: str | None, sparse: bool) -> None:
    data = netcore.serialize(net, sparse_layers=sparse)
    if out in (None, "-"):
        sys.stdout.write(data.decode() + "\n")
    else:
        Path(out).write_bytes(data)
        print(f"wrote {out}: {net}", file=sys.stderr)


# --------------------------------------------------------------------------
# build


def _gadget(args) -> netcore.ReluNet:
    name = args.name
    table = {
        "mid": gadgets.mid3,
        "max": gadgets.max2,
        "min": gadgets.min2,
        "minmax": gadgets.minmax2,
        "max3": gadgets.max3,
        "min3": gadgets.min3,
        "gate": gadgets.binary_gate,
        "clamp": gadgets.clamp01,
    }
    if name in table:
        return table[name]()
    if name == "square":
        return gadgets.square_approx(args.s, args.mu)
    if name == "mul":
        return gadgets.mul_approx(args.s, args.range, args.mu)
    if name == "product":
        return gadgets.product_approx(args.k, args.N, args.L)
    if name == "teeth":
        return gadgets.teeth(args.s)
    if name == "window":
        return gadgets.support_window(args.k)
    if name == "indicator":
        return gadgets.soft_indicator(gadgets.IndicatorSpec(args.a, args.b, args.delta))
    raise UsageError(f"unknown gadget {name!r}")


def _bits_net(args) -> netcore.ReluNet:
    delta = args.delta if args.delta is not None else Fraction(1, 2 ** (args.j + 2))
    if args.kind == "extract":
        return bits.extract_bits(args.j, delta, args.r)
    if args.kind == "split":
        return bits.split_weighted_bits(args.j, delta, args.r, args.k)
    return bits.select_bit(args.r, args.K)


def _read_samples(path: str) -> interp.SampleSet:
    pts, vals = [], []
    for line in Path(path).read_text().splitlines():
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        cells = [c.strip() for c in line.split(",")]
        try:
            nums = [Fraction(c) for c in cells]
        except ValueError:
            continue  # header
        pts.append(tuple(nums[:-1]))
        vals.append(nums[-1])
    return interp.SampleSet(pts, vals)


def _interp_net(args) -> netcore.ReluNet:
    if bool(args.samples) == bool(args.bits):
        raise UsageError("give exactly one of --samples or --bits")
    if args.samples:
        return interp.fit_point_samples(_read_samples(args.samples), args.N, args.L)
    return interp.fit_bit_samples(interp.read_bit_table(args.bits), args.N, args.L)


def _load_sis(path: str) -> sis.SisFunction:
    try:
        return sis.SisFunction.from_json(Path(path).read_text())
    except (OSError, json.JSONDecodeError, ValueError) as exc:
        raise UsageError(f"cannot load {path}: {exc}") from exc


def _sis_net(args) -> netcore.ReluNet:
    g = _load_sis(args.sis)
    params, phi0, cert = harness.sis_setup(g, args.eps)
    if args.kind == "q":
        return sis.build_q_net(g, params, phi0, cert)
    if args.kind == "term":
        return sis.build_term_net(g, args.shift or [0] * g.d, params, phi0, cert)
    return sis.build_uniform_net(g, params, phi0, cert)


def _spline_net(args) -> netcore.ReluNet:
    return splines.bspline_net(args.k, args.d, args.N, args.L)


def cmd_build(args) -> int:
    builders = {"gadget": _gadget, "bits": _bits_net, "interp": _interp_net, "sis": _sis_net,
                "spline": _spline_net}
    net = builders[args.what](args)
    _write_net(net, args.out, args.sparse)
    return EXIT_OK


# --------------------------------------------------------------------------
# eval


def _fmt(v) -> str:
    if isinstance(v, Fraction):
        return str(v)
    return f"{float(v):.17g}"


def cmd_eval(args) -> int:
    try:
        net = netcore.deserialize(Path(args.net).read_bytes())
    except OSError as exc:
        raise UsageError(str(exc)) from exc
    try:
        x = [Fraction(v.strip()) for v in args.input.split(",") if v.strip()]
    except ValueError as exc:
        raise UsageError(f"bad input vector {args.input!r}") from exc
    if len(x) != net.input_dim:
        raise UsageError(f"net expects {net.input_dim} inputs, got {len(x)}")
    mode = args.mode or netcore.default_mode()
    arr = np.array(x, dtype=object) if mode == "rational" else np.array([float(v) for v in x])
    out = netcore.evaluate(net, arr, mode)
    print(",".join(_fmt(v) for v in out))
    return EXIT_OK


# --------------------------------------------------------------------------
# verify / report


_CHECK_FLAGS = ("j", "r", "k", "K", "N", "L", "d", "seed", "eps", "delta", "tails", "count", "s_max",
                "shift", "resolution")


def _run_check(args) -> list:
    fn = harness.VERIFIERS[args.check]
    accepted = inspect.signature(fn).parameters
    kwargs = {}
    for flag in _CHECK_FLAGS:
        val = getattr(args, flag, None)
        if val is None:
            continue
        if flag not in accepted:
            raise UsageError(f"--{flag.replace('_', '-')} does not apply to {args.check}")
        kwargs[flag] = val
    if args.sis:
        if "g" not in accepted:
            raise UsageError(f"--sis does not apply to {args.check}")
        kwargs["g"] = _load_sis(args.sis)
    if args.mode:
        kwargs["mode"] = args.mode
    return fn(**kwargs)


def _finish(reports, args) -> int:
    for rep in reports:
        print(rep.summary())
    if getattr(args, "csv", None):
        harness.write_csv(reports, args.csv)
    if getattr(args, "svg", None):
        rows = harness.read_csv(args.csv) if args.csv else [r.row() for r in reports]
        Path(args.svg).write_text(harness.svg_plot(rows))
    return EXIT_OK if reports and all(r.passed for r in reports) else EXIT_FAIL


def cmd_verify(args) -> int:
    return _finish(_run_check(args), args)


def cmd_report(args) -> int:
    if args.check is None:
        if not args.from_csv:
            raise UsageError("report needs a check name or --from-csv")
        rows = harness.read_csv(args.from_csv)
        if args.svg:
            Path(args.svg).write_text(harness.svg_plot(rows))
        return EXIT_OK if rows and all(r["pass"] == "true" for r in rows) else EXIT_FAIL
    if not args.csv:
        raise UsageError("report needs --csv")
    return _finish(_run_check(args), args)


# --------------------------------------------------------------------------
# rate

TARGETS = {
    "sin": lambda x: math.sin(2 * math.pi * float(x)),
    "poly": lambda x: x * (1 - x),
    "zero": lambda x: 0,
    "abs": lambda x: abs(x - Fraction(1, 3)),
}


def cmd_rate(args) -> int:
    if args.target not in TARGETS:
        raise UsageError(f"unknown target {args.target!r}; choose from {sorted(TARGETS)}")
    fit = harness.rate_experiment(TARGETS[args.target], splines.BsplineSpec(args.k), args.levels,
                                  mode=args.mode, resolution=args.resolution,
                                  slope_expected=args.expected)
    for j, e, fl, (w, dp) in zip(fit.levels, fit.errors, fit.floors, fit.sizes):
        print(f"j={j} sup_error={e:.6g} floor={fl:.6g} width={w} depth={dp}")
    if fit.verdict == "exact":
        print("verdict: exact (errors at the construction floor)")
        return EXIT_OK
    ok = fit.slope <= fit.slope_expected + args.tolerance
    print(f"slope={fit.slope:.4f} expected={fit.slope_expected:.4f} tolerance={args.tolerance} "
          f"{'PASS' if ok else 'FAIL'}")
    return EXIT_OK if ok else EXIT_FAIL


# --------------------------------------------------------------------------
# parser


def _add_check_flags(p) -> None:
    p.add_argument("check", choices=sorted(harness.VERIFIERS), nargs="?" if p.prog.endswith("report") else None)
    for name in ("j", "r", "k", "K", "N", "L", "d", "seed", "tails", "count", "s-max", "resolution"):
        p.add_argument(f"--{name}", type=int, default=None, dest=name.replace("-", "_"))
    p.add_argument("--eps", type=_frac, default=None)
    p.add_argument("--delta", type=_frac, default=None)
    p.add_argument("--shift", type=_levels, default=None, help="shift vector k, e.g. 0 or -1,0")
    p.add_argument("--sis", default=None, help="SisFunction JSON file")
    p.add_argument("--csv", default=None)
    p.add_argument("--svg", default=None)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="sinet", description="Explicit ReLU network constructions.")
    parser.add_argument("--mode", choices=netcore.MODES, default=None,
                        help="arithmetic (default: $SINET_MODE or float)")
    sub = parser.add_subparsers(dest="command", required=True)

    b = sub.add_parser("build", help="construct a network and write it as JSON")
    bs = b.add_subparsers(dest="what", required=True)
    g = bs.add_parser("gadget")
    g.add_argument("--name", required=True)
    g.add_argument("--s", type=int, default=3)
    g.add_argument("--mu", type=int, default=1)
    g.add_argument("--k", type=int, default=2)
    g.add_argument("--N", type=int, default=1)
    g.add_argument("--L", type=int, default=1)
    g.add_argument("--range", type=_frac, default=Fraction(1))
    g.add_argument("--a", type=_frac, default=Fraction(0))
    g.add_argument("--b", type=_frac, default=Fraction(1))
    g.add_argument("--delta", type=_frac, default=Fraction(1, 4))
    t = bs.add_parser("bits")
    t.add_argument("--kind", choices=("extract", "split", "select"), default="extract")
    t.add_argument("--j", type=int, default=6)
    t.add_argument("--r", type=int, default=2)
    t.add_argument("--k", type=int, default=3)
    t.add_argument("--K", type=int, default=8)
    t.add_argument("--delta", type=_frac, default=None)
    i = bs.add_parser("interp")
    i.add_argument("--samples", help="CSV rows x_1,...,x_d,y")
    i.add_argument("--bits", help="CSV rows x_1,...,x_d,b_1,...,b_L")
    i.add_argument("--N", type=int, required=True)
    i.add_argument("--L", type=int, required=True)
    s = bs.add_parser("sis")
    s.add_argument("--sis", required=True)
    s.add_argument("--eps", type=_frac, default=Fraction(1, 16))
    s.add_argument("--kind", choices=("term", "q", "uniform"), default="uniform")
    s.add_argument("--shift", type=_levels, default=None)
    sp = bs.add_parser("spline")
    sp.add_argument("--k", type=int, default=3)
    sp.add_argument("--d", type=int, default=1)
    sp.add_argument("--N", type=int, default=1)
    sp.add_argument("--L", type=int, default=1)
    for p in (g, t, i, s, sp):
        p.add_argument("--out", default=None)
        p.add_argument("--sparse", action="store_true", help="sparse layer encoding")

    e = sub.add_parser("eval", help="evaluate a saved network at one point")
    e.add_argument("--net", required=True)
    e.add_argument("--in", dest="input", required=True)

    v = sub.add_parser("verify", help="run a bound and budget check")
    _add_check_flags(v)

    rp = sub.add_parser("report", help="run a check and write CSV (and optional SVG)")
    _add_check_flags(rp)
    rp.add_argument("--from-csv", default=None)

    r = sub.add_parser("rate", help="empirical convergence slope of the full pipeline")
    r.add_argument("--target", required=True)
    r.add_argument("--k", type=int, default=3)
    r.add_argument("--levels", type=_levels, default=[4, 5, 6, 7])
    r.add_argument("--expected", type=float, default=None)
    r.add_argument("--tolerance", type=float, default=0.5)
    r.add_argument("--resolution", type=int, default=None)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    if args.mode is None and os.environ.get("SINET_MODE"):
        try:
            netcore.default_mode()
        except ValueError as exc:
            print(f"sinet: {exc}", file=sys.stderr)
            return EXIT_USAGE
    handlers = {"build": cmd_build, "eval": cmd_eval, "verify": cmd_verify, "report": cmd_report,
                "rate": cmd_rate}
    try:
        return handlers[args.command](args)
    except (UsageError, ValueError, netcore.ParseError, interp.CapacityError) as exc:
        print(f"sinet: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
