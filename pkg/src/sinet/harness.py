"""Error measurement, size audits, rate fits and report files.

Every check reduces to :func:`measure`: evaluate a network on a deterministic
grid, compare against an exact oracle, and compare the sup error with a
claimed bound.
"""

from __future__ import annotations

import csv
import io
import json
import math
import random
from dataclasses import dataclass, field
from fractions import Fraction
from itertools import product
from typing import Callable

import numpy as np

from .bits import QDomain, bits_of, extract_bits, select_bit, split_weighted_bits
from .gadgets import mid3, product_approx, square_approx
from .interp import BitTable, SampleSet, fit_bit_samples, fit_point_samples
from .netcore import ReluNet, SizeBudget, default_mode, evaluate, to_fraction
from .sis import (
    ApproxParams,
    SisFunction,
    build_q_net,
    build_term_net,
    build_uniform_net,
    eval_sis,
    hat_generator,
    hat_net,
    q_net_budget,
    term_net_budget,
    uniform_net_budget,
)
from .splines import (
    BsplineSpec,
    bspline_d,
    bspline_net,
    bspline_net_bound,
    bspline_net_budget,
    quasi_interpolate,
)

__all__ = [
    "FLOAT_SLACK",
    "ErrorReport",
    "RateFit",
    "default_resolution",
    "grid_points",
    "measure",
    "audit_budget",
    "RatePolicy",
    "default_policy",
    "rate_experiment",
    "fit_slope",
    "sis_setup",
    "VERIFIERS",
    "verify",
    "CSV_FIELDS",
    "write_csv",
    "read_csv",
    "svg_plot",
]

FLOAT_SLACK = 1e-9
CSV_FIELDS = ["construct", "param_json", "width", "depth", "params", "sup_error", "bound", "pass"]


@dataclass
class ErrorReport:
    construct: str
    params: dict
    sup_error: float
    lp_errors: dict
    grid_size: int
    domain: str
    width: int
    depth: int
    parameter_count: int
    bound_claimed: float
    bound_satisfied: bool
    resolution: str
    mode: str
    budget: tuple | None = None
    budget_ok: bool | None = None

    @property
    def passed(self) -> bool:
        return self.bound_satisfied and self.budget_ok is not False

    def row(self) -> dict:
        return {
            "construct": self.construct,
            "param_json": json.dumps(self.params, sort_keys=True),
            "width": self.width,
            "depth": self.depth,
            "params": self.parameter_count,
            "sup_error": repr(float(self.sup_error)),
            "bound": repr(float(self.bound_claimed)),
            "pass": "true" if self.passed else "false",
        }

    def summary(self) -> str:
        verdict = "PASS" if self.passed else "FAIL"
        budget = ""
        if self.budget is not None:
            budget = f" budget={self.budget[0]}x{self.budget[1]}"
        return (
            f"{verdict} {self.construct} {json.dumps(self.params, sort_keys=True)} "
            f"sup_error={float(self.sup_error):.6g} bound={float(self.bound_claimed):.6g} "
            f"width={self.width} depth={self.depth}{budget} grid={self.grid_size} "
            f"[{self.domain}, {self.resolution}, {self.mode}]"
        )


@dataclass
class RateFit:
    levels: list
    errors: list
    slope: float | None
    slope_expected: float
    verdict: str = "fit"
    floors: list = field(default_factory=list)
    sizes: list = field(default_factory=list)

    def __post_init__(self):
        if len(self.levels) < 3:
            raise ValueError("a rate fit needs at least 3 levels")


# --------------------------------------------------------------------------
# grids


def default_resolution(d: int) -> int:
    return {1: 12, 2: 7}.get(d, 4)


def grid_points(domain, d: int, resolution: int | None = None) -> tuple[list, str]:
    """Exact grid points (tuples of Fractions) and a description of the grid."""
    level = resolution if resolution is not None else default_resolution(d)
    if isinstance(domain, QDomain):
        if domain.d != d:
            raise ValueError(f"domain has dimension {domain.d}, net expects {d}")
        axis = domain.grid_1d(level)
        return [tuple(p) for p in product(axis, repeat=d)], f"Q dyadic 2^-{level}"
    if isinstance(domain, str) or domain is None:
        if domain not in ("cube", None):
            raise ValueError(f"unknown domain {domain!r}")
        axis = [Fraction(i, 2 ** level) for i in range(2 ** level + 1)]
        return [tuple(p) for p in product(axis, repeat=d)], f"cube dyadic 2^-{level} with endpoint"
    pts = [tuple(to_fraction(v) for v in np.atleast_1d(p)) for p in domain]
    if any(len(p) != d for p in pts):
        raise ValueError("explicit points do not match the net input dimension")
    return pts, "explicit points"


def _as_vec(v) -> list:
    if isinstance(v, (list, tuple, np.ndarray)):
        return [float(x) if not isinstance(x, Fraction) else x for x in np.ravel(np.asarray(v, dtype=object))]
    return [v]


def measure(net: ReluNet, oracle: Callable, domain="cube", resolution: int | None = None,
            bound=0.0, mode: str | None = None, construct: str = "", params: dict | None = None,
            budget: SizeBudget | tuple | None = None) -> ErrorReport:
    """Sup and grid-L^p error of ``net`` against ``oracle``.

    ``domain`` is ``"cube"`` (dyadic grid of ``[0,1]^d`` including 1), a
    :class:`~sinet.bits.QDomain` (dyadic points inside the kept intervals) or
    an explicit sequence of points.  The oracle receives a bare number when
    d = 1 and a tuple otherwise, always with Fraction coordinates, and may
    return a number or a sequence matching the net outputs.
    """
    mode = mode or default_mode()
    d = net.input_dim
    pts, res = grid_points(domain, d, resolution)
    if not pts:
        raise ValueError("empty grid")
    if mode == "rational":
        x = np.array(pts, dtype=object).reshape(len(pts), d)
    else:
        x = np.array([[float(v) for v in p] for p in pts], dtype=float).reshape(len(pts), d)
    y = evaluate(net, x, mode)
    errs = np.zeros(len(pts))
    exact_sup = Fraction(0)
    for i, p in enumerate(pts):
        want = _as_vec(oracle(p[0] if d == 1 else p))
        got = y[i]
        if len(want) != len(got):
            raise ValueError(f"oracle gives {len(want)} values, net gives {len(got)}")
        if mode == "rational":
            e = max(abs(Fraction(g) - to_fraction(w)) for g, w in zip(got, want))
            exact_sup = max(exact_sup, e)
            errs[i] = float(e)
        else:
            errs[i] = max(abs(float(g) - float(w)) for g, w in zip(got, want))
    sup = float(errs.max())
    lp = {1: float(errs.mean()), 2: float(math.sqrt((errs ** 2).mean())), "inf": sup}
    if mode == "rational":
        ok = exact_sup <= to_fraction(bound)
    else:
        ok = sup <= float(bound) + FLOAT_SLACK
    bound = float(bound)
    if isinstance(budget, tuple):
        budget = SizeBudget(*budget)
    if isinstance(domain, QDomain):
        dom = "Q"
    else:
        dom = "full-cube" if isinstance(domain, str) or domain is None else "points"
    return ErrorReport(
        construct=construct or net.name or "net",
        params=params or {},
        sup_error=sup,
        lp_errors=lp,
        grid_size=len(pts),
        domain=dom,
        width=net.width,
        depth=net.depth,
        parameter_count=net.parameter_count,
        bound_claimed=bound,
        bound_satisfied=bool(ok),
        resolution=res,
        mode=mode,
        budget=(budget.width_bound, budget.depth_bound) if budget else None,
        budget_ok=audit_budget(net, budget) if budget else None,
    )


def audit_budget(net: ReluNet, budget: SizeBudget | tuple) -> bool:
    if isinstance(budget, tuple):
        budget = SizeBudget(*budget)
    return budget.admits(net)


# --------------------------------------------------------------------------
# rates


@dataclass(frozen=True)
class RatePolicy:
    """How to pick the construction parameters at level ``j``."""

    extra_bits: int = 6
    N: int = 1
    max_L: int = 8

    def params(self, j: int, d: int, mu: float) -> ApproxParams:
        eps = Fraction(1, 2 ** (math.ceil(mu * j) + self.extra_bits))
        bits = math.ceil(math.log2(1 / eps)) + 1
        rt = math.ceil(math.sqrt(bits))
        st = math.ceil(bits / rt)
        s = min(2, j * d)
        r = max(1, math.ceil(d * j / 2) - s)
        return ApproxParams(r, s, rt, st, eps, Fraction(1, 2 ** (j + 2)))

    def phi0(self, k: int, d: int, eps: Fraction, sup_norm: Fraction):
        if k == 2 and d == 1:
            return hat_net(1)
        if k == 2:
            for L in range(1, self.max_L + 1):
                net, err = hat_net(d, self.N, L)
                if err <= eps * sup_norm:
                    return net, err
        else:
            for L in range(1, self.max_L + 1):
                err = bspline_net_bound(k, d, self.N, L)
                if err <= eps * sup_norm:
                    return bspline_net(k, d, self.N, L), err
        raise ValueError("no phi0 within max_L meets the certificate")


def default_policy() -> RatePolicy:
    return RatePolicy()


def fit_slope(levels, errors) -> float:
    return float(np.polyfit(np.asarray(levels, float), np.log2(np.asarray(errors, float)), 1)[0])


def rate_experiment(target: Callable, spec: BsplineSpec, levels, policy: RatePolicy | None = None,
                    mode: str | None = None, resolution: int | None = None,
                    slope_expected: float | None = None) -> RateFit:
    """Sup error of the uniform network for ``quasi_interpolate(target, j)`` at each level.

    The slope of ``log2(error)`` against ``j`` is fitted by least squares.  When
    every error sits at the construction floor ``6 C M ||phi|| eps`` the target
    is reproduced exactly and the verdict is ``"exact"`` with no slope.
    """
    levels = list(levels)
    if len(levels) < 3:
        raise ValueError("a rate fit needs at least 3 levels")
    policy = policy or default_policy()
    mu = float(spec.k if slope_expected is None else slope_expected)
    errors, floors, sizes = [], [], []
    for j in levels:
        g = quasi_interpolate(target, j, spec)
        params = policy.params(j, spec.d, mu)
        phi0, cert = policy.phi0(spec.k, spec.d, params.epsilon, g.generator.sup_norm)
        net = build_uniform_net(g, params, phi0, cert)
        rep = measure(net, target, "cube", resolution, mode=mode)
        errors.append(rep.sup_error)
        floors.append(float(6 * g.generator.C * g.M * g.generator.sup_norm * params.epsilon))
        sizes.append((net.width, net.depth))
    if all(e <= f + FLOAT_SLACK for e, f in zip(errors, floors)) and max(errors) <= min(floors):
        return RateFit(levels, errors, None, -mu, "exact", floors, sizes)
    return RateFit(levels, errors, fit_slope(levels, errors), -mu, "fit", floors, sizes)


# --------------------------------------------------------------------------
# verifiers (one per construct; all deterministic given the seed)


def _bits_point(bits, tail) -> Fraction:
    x = Fraction(0)
    for i, b in enumerate(bits):
        x += Fraction(b, 2 ** (i + 1))
    return x + tail / 2 ** len(bits)


def _q_points(j: int, delta: Fraction, tails: int, rng: random.Random) -> list:
    """Every pattern of the first j bits with ``tails`` random tails inside Q."""
    room = 1 - delta * 2 ** j
    pts = []
    for m in range(2 ** j):
        lead = bits_of(Fraction(m, 2 ** j), j)
        for _ in range(tails):
            t = Fraction(rng.randrange(2 ** 16), 2 ** 16) * room
            pts.append(_bits_point(lead, t))
    return pts


def verify_extract_bits(j=6, r=3, delta=None, tails=8, seed=0, mode=None):
    delta = to_fraction(delta) if delta is not None else Fraction(1, 2 ** (j + 2))
    net = extract_bits(j, delta, r)
    pts = _q_points(j, delta, tails, random.Random(seed))

    def oracle(x):
        b = bits_of(x, r)
        return b + [x * 2 ** r - sum(bi * 2 ** (r - 1 - i) for i, bi in enumerate(b))]

    return [measure(net, oracle, [[p] for p in pts], mode=mode or "rational", construct="extract_bits",
                    params={"j": j, "r": r, "delta": str(delta)}, budget=(2 ** (r + 1) + 1, 3))]


def verify_split_bits(j=6, r=3, k=None, delta=None, tails=8, seed=0, mode=None):
    delta = to_fraction(delta) if delta is not None else Fraction(1, 2 ** (j + 2))
    ks = [k] if k is not None else list(range(j + 1))
    pts = _q_points(j, delta, tails, random.Random(seed))
    out = []
    for kk in ks:
        net = split_weighted_bits(j, delta, r, kk)

        def oracle(x, kk=kk):
            b = bits_of(x, j)
            s1 = sum(b[i - 1] * 2 ** (j - i) for i in range(1, kk + 1))
            s2 = sum(b[i - 1] * 2 ** (j - i) for i in range(kk + 1, j + 1))
            return [s1, s2, x * 2 ** j - s1 - s2]

        out.append(measure(net, oracle, [[p] for p in pts], mode=mode or "rational",
                           construct="split_weighted_bits", params={"j": j, "r": r, "k": kk, "delta": str(delta)},
                           budget=(2 ** (r + 1) + 3, 2 * math.ceil(j / r) + 1)))
    return out


def verify_select_bit(K=8, r=2, mode=None):
    net = select_bit(r, K)
    pts = [(Fraction(m, 2 ** K), kk) for m in range(2 ** K) for kk in range(1, K + 1)]

    def oracle(p):
        return bits_of(p[0], K)[int(p[1]) - 1]

    return [measure(net, oracle, pts, mode=mode or "rational", construct="select_bit",
                    params={"K": K, "r": r}, budget=(2 ** (r + 1) + 3, 4 * math.ceil(K / r) + 1))]


def _random_samples(rng, count, d, spread=60):
    pts = set()
    while len(pts) < count:
        pts.add(tuple(rng.randint(-spread, spread) for _ in range(d)))
    return sorted(pts)


def verify_point_fit(N=3, L=3, d=1, seed=0, mode=None):
    rng = random.Random(seed)
    pts = _random_samples(rng, N * N * L, d, max(60, N * N * L))
    vals = [Fraction(rng.randint(0, 1000), rng.choice([1, 3, 7])) for _ in pts]
    net = fit_point_samples(SampleSet(pts, vals), N, L)
    table = dict(zip(pts, vals))
    return [measure(net, lambda p: table[tuple(int(v) for v in np.atleast_1d(p))], [list(p) for p in pts],
                    mode=mode or "rational", construct="fit_point_samples",
                    params={"N": N, "L": L, "d": d, "seed": seed}, budget=(4 * N + 4, L + 2))]


def verify_bit_fit(N=2, L=3, d=1, seed=0, mode=None):
    rng = random.Random(seed)
    pts = _random_samples(rng, N * N * L, d, max(60, N * N * L))
    rows = [[rng.randint(0, 1) for _ in range(L)] for _ in pts]
    net = fit_bit_samples(BitTable(pts, rows), N, L)
    table = {p: r for p, r in zip(pts, rows)}
    queries = [list(p) + [k] for p in pts for k in range(1, L + 1)]
    return [measure(net, lambda q: table[tuple(int(v) for v in q[:-1])][int(q[-1]) - 1], queries,
                    mode=mode or "rational", construct="fit_bit_samples",
                    params={"N": N, "L": L, "d": d, "seed": seed}, budget=(4 * N + 5, 5 * L + 2))]


def verify_mid3(count=1000, seed=0, mode=None):
    rng = np.random.default_rng(seed)
    trip = rng.integers(-2 ** 20, 2 ** 20, size=(count, 3)) / 2 ** 10
    trip[: count // 10, 1] = trip[: count // 10, 0]  # ties
    return [measure(mid3(), lambda p: sorted(p)[1], trip, mode=mode, construct="mid3",
                    params={"count": count, "seed": seed}, budget=(14, 3))]


def verify_products(s_max=6, ks=(2, 3, 4), Ns=(1, 2), Ls=(1, 2), mode=None, resolution=12):
    out = []
    for s in range(1, s_max + 1):
        out.append(measure(square_approx(s), lambda x: x * x, "cube", resolution, bound=Fraction(1, 4 ** (s + 1)),
                           mode=mode, construct="square_approx", params={"s": s}))
    for k in ks:
        for N in Ns:
            for L in Ls:
                net = product_approx(k, N, L)
                bound = 9 * (k - 1) * Fraction(1, (N + 1) ** (7 * k * L))
                res = {2: 4, 3: 2}.get(k, 2)
                # non-dyadic grid: dyadic points of coarse level are hit exactly
                pts = [tuple(Fraction(i, 3 ** res) for i in idx) for idx in product(range(3 ** res + 1), repeat=k)]
                out.append(measure(net, lambda p: math.prod(p), pts, bound=bound, mode=mode or "rational",
                                   construct="product_approx", params={"k": k, "N": N, "L": L},
                                   budget=(9 * N + k + 7, 7 * k * (k - 1) * L)))
    return out


def verify_bspline_net(ks=(3, 4), ds=(1, 2), Ns=(1, 2), L=1, mode=None):
    out = []
    for k in ks:
        for d in ds:
            for N in Ns:
                net = bspline_net(k, d, N, L)
                side = 10000 if d == 1 else 100
                axis = [Fraction(-1) + Fraction(i * (k + 3), side - 1) for i in range(side)]
                pts = list(product(axis, repeat=d))
                out.append(measure(net, lambda x: bspline_d(k, d, np.atleast_1d(np.asarray(x, dtype=object))),
                                   pts, bound=bspline_net_bound(k, d, N, L), mode=mode,
                                   construct="bspline_net", params={"k": k, "d": d, "N": N, "L": L},
                                   budget=bspline_net_budget(k, d, N, L)))
    return out


def random_sis(j: int, d: int = 1, seed: int = 0, dyadic_bits: int | None = None) -> SisFunction:
    """Random member of ``S_j(N_2^d, 1)`` over every shift that touches the unit cube."""
    rng = random.Random(seed)
    den = 2 ** dyadic_bits if dyadic_bits else 3 ** 9
    coeffs = {n: Fraction(rng.randint(-den + 1, den - 1), den) for n in product(range(-1, 2 ** j), repeat=d)}
    return SisFunction(j, coeffs, 1, hat_generator(d))


def sis_setup(g: SisFunction, eps, r=None, s=None, uniform=False):
    """Default construction parameters and ``phi0`` (with its certificate) for ``g``."""
    eps = to_fraction(eps)
    d, j = g.d, g.j
    bits = math.ceil(math.log2(1 / eps)) + 1
    rt = math.ceil(math.sqrt(bits))
    st = math.ceil(bits / rt)
    s = s if s is not None else min(2, j * d)
    r = r if r is not None else max(1, math.ceil(d * j / 2) - s)
    delta = Fraction(1, 2 ** (j + 2))
    params = ApproxParams(r, s, rt, st, eps, delta)
    k = None
    name = g.generator.name
    if name.startswith("bspline:k="):
        k = int(name.split("=")[1])
    policy = RatePolicy()
    if k is None:
        raise ValueError(f"no network available for generator {name!r}")
    phi0, cert = policy.phi0(k, d, eps, g.generator.sup_norm)
    return params, phi0, cert


def _sis_meta(g, params):
    return {"j": g.j, "d": g.d, "M": str(g.M), "eps": str(params.epsilon), "r": params.r, "s": params.s,
            "r_tilde": params.r_tilde, "s_tilde": params.s_tilde, "delta": str(params.delta),
            "generator": g.generator.name}


def verify_term_net(g: SisFunction | None = None, eps=Fraction(1, 16), shift=None, mode=None, resolution=None):
    g = g or random_sis(3)
    params, phi0, cert = sis_setup(g, eps)
    shifts = [tuple(shift)] if shift is not None else list(g.generator.shift_set)
    out = []
    for k in shifts:
        net = build_term_net(g, k, params, phi0, cert)

        def oracle(x, k=k):
            from .sis import m_r_split

            m, r = m_r_split(np.atleast_1d(np.asarray(x, dtype=object)).tolist(), g.j)
            c = g.coeff(tuple(mi + ki for mi, ki in zip(m, k)))
            return c * g.generator([ri - ki for ri, ki in zip(r, k)])

        bound = 3 * params.epsilon * g.M * g.generator.sup_norm
        meta = dict(_sis_meta(g, params), k=list(k))
        out.append(measure(net, oracle, QDomain(g.j, params.delta, g.d), resolution or g.j + 5,
                           bound=bound, mode=mode, construct="term_net", params=meta,
                           budget=term_net_budget(g, params, phi0)))
    return out


def verify_q_net(g: SisFunction | None = None, eps=Fraction(1, 16), mode=None, resolution=None):
    g = g or random_sis(3)
    params, phi0, cert = sis_setup(g, eps)
    net = build_q_net(g, params, phi0, cert)
    bound = 3 * g.generator.C * g.M * g.generator.sup_norm * params.epsilon
    return [measure(net, lambda x: eval_sis(g, x), QDomain(g.j, params.delta, g.d), resolution,
                    bound=bound, mode=mode, construct="q_net", params=_sis_meta(g, params),
                    budget=q_net_budget(g, params, phi0))]


def verify_uniform_net(g: SisFunction | None = None, eps=Fraction(1, 16), mode=None, resolution=None):
    g = g or random_sis(3)
    params, phi0, cert = sis_setup(g, eps, uniform=True)
    net = build_uniform_net(g, params, phi0, cert)
    bound = 6 * g.generator.C * g.M * g.generator.sup_norm * params.epsilon
    return [measure(net, lambda x: eval_sis(g, x), "cube", resolution, bound=bound, mode=mode,
                    construct="uniform_net", params=_sis_meta(g, params),
                    budget=uniform_net_budget(g, params, phi0))]


VERIFIERS = {
    "lemma-5.1": verify_extract_bits,
    "lemma-5.2": verify_split_bits,
    "lemma-5.3": verify_select_bit,
    "lemma-5.4": verify_point_fit,
    "lemma-5.5": verify_bit_fit,
    "lemma-6.2": verify_mid3,
    "lemma-7.1": verify_products,
    "lemma-4.3": verify_bspline_net,
    "prop-5.1": verify_term_net,
    "theorem-3.2": verify_q_net,
    "theorem-3.3": verify_uniform_net,
}


def verify(name: str, **kwargs) -> list:
    if name not in VERIFIERS:
        raise KeyError(f"unknown check {name!r}")
    return VERIFIERS[name](**kwargs)


# --------------------------------------------------------------------------
# files


def write_csv(reports, path_or_file) -> None:
    rows = [r.row() for r in reports]
    if isinstance(path_or_file, (str, bytes)) or hasattr(path_or_file, "__fspath__"):
        with open(path_or_file, "w", newline="") as fh:
            _write_rows(rows, fh)
    else:
        _write_rows(rows, path_or_file)


def _write_rows(rows, fh):
    w = csv.DictWriter(fh, fieldnames=CSV_FIELDS, lineterminator="\n")
    w.writeheader()
    w.writerows(rows)


def read_csv(path_or_text) -> list[dict]:
    if isinstance(path_or_text, str) and "\n" in path_or_text:
        return list(csv.DictReader(io.StringIO(path_or_text)))
    with open(path_or_text, newline="") as fh:
        return list(csv.DictReader(fh))


def svg_plot(rows, width: int = 640, height: int = 360) -> str:
    """Bar chart of ``log2(sup_error)`` and ``log2(bound)`` per CSV row."""
    pad = 48
    n = max(1, len(rows))
    vals = []
    for r in rows:
        e, b = float(r["sup_error"]), float(r["bound"])
        vals.append((math.log2(e) if e > 0 else None, math.log2(b) if b > 0 else None))
    finite = [v for pair in vals for v in pair if v is not None]
    lo = math.floor(min(finite, default=-1)) - 1
    hi = math.ceil(max(finite, default=0)) + 1
    span = hi - lo or 1

    def ypos(v):
        return pad + (hi - v) / span * (height - 2 * pad)

    slot = (width - 2 * pad) / n
    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}">',
        f'<rect x="0" y="0" width="{width}" height="{height}" fill="white"/>',
        f'<line x1="{pad}" y1="{pad}" x2="{pad}" y2="{height - pad}" stroke="black"/>',
        f'<text x="4" y="{pad - 8}" font-size="11">log2 error</text>',
        f'<text x="4" y="{pad + 4}" font-size="10">{hi}</text>',
        f'<text x="4" y="{height - pad}" font-size="10">{lo}</text>',
    ]
    base = height - pad
    for i, ((e, b), r) in enumerate(zip(vals, rows)):
        x0 = pad + i * slot + slot * 0.15
        w = slot * 0.3
        color = "#2a7" if r["pass"] == "true" else "#c33"
        if e is not None:
            y = ypos(e)
            parts.append(f'<rect x="{x0:.2f}" y="{y:.2f}" width="{w:.2f}" height="{base - y:.2f}" fill="{color}"/>')
        if b is not None:
            y = ypos(b)
            parts.append(f'<rect x="{x0 + w:.2f}" y="{y:.2f}" width="{w:.2f}" height="{base - y:.2f}" '
                         f'fill="none" stroke="#333"/>')
        parts.append(f'<text x="{x0:.2f}" y="{height - pad + 14}" font-size="9">{r["construct"]}</text>')
    parts.append("</svg>")
    return "\n".join(parts) + "\n"
