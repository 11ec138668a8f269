"""Shift-invariant spaces and the networks that approximate their members.

A member of ``S_j(phi, M)`` is ``g(x) = sum_n c_n phi(2^j x - n)`` with finitely
many nonzero ``|c_n| < M``.  This module provides the exact oracle for ``g``,
its localized form on the unit cube, the coefficient bit tables and ``q``
packing, and the network builders for the punctured cube and for the whole
cube (via the mid-value lift).
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from fractions import Fraction
from itertools import product
from typing import Callable

import numpy as np

from .bits import QDomain, bits_of, split_weighted_bits
from .gadgets import mid3
from .interp import BitTable, fit_bit_samples
from .netcore import (
    AffineLayer,
    ReluNet,
    compose,
    linear_net,
    parallel,
    passthrough,
    stack,
    to_fraction,
)

__all__ = [
    "Generator",
    "SisFunction",
    "ApproxParams",
    "register_generator",
    "generator_from_name",
    "hat_generator",
    "hat_net",
    "eval_sis",
    "m_r_split",
    "localize",
    "coeff_bits",
    "split_points",
    "q_index",
    "build_term_net",
    "build_q_net",
    "build_uniform_net",
    "q_net_budget",
    "uniform_net_budget",
    "rate_compose",
]


# --------------------------------------------------------------------------
# generators


@dataclass(frozen=True)
class Generator:
    """Compactly supported ``phi`` on R^d.

    ``support`` holds one ``(lo, hi)`` pair per coordinate; ``phi`` is assumed
    to vanish outside the box and to be nonzero somewhere in each open slab, so
    the active shifts can be read off the box.  ``phi`` takes a sequence of d
    numbers and must be exact on :class:`~fractions.Fraction` input.
    """

    phi: Callable
    support: tuple
    sup_norm: Fraction
    name: str = "custom"
    offset: tuple = ()

    def __post_init__(self):
        sup = tuple((to_fraction(lo), to_fraction(hi)) for lo, hi in self.support)
        if any(lo >= hi for lo, hi in sup):
            raise ValueError("empty support box")
        object.__setattr__(self, "support", sup)
        object.__setattr__(self, "sup_norm", to_fraction(self.sup_norm))
        if not self.sup_norm > 0:
            raise ValueError("sup_norm must be positive")
        if not self.offset:
            object.__setattr__(self, "offset", tuple(Fraction(0) for _ in sup))

    @property
    def d(self) -> int:
        return len(self.support)

    def __call__(self, x):
        return self.phi(x)

    def shifted(self, t) -> "Generator":
        """``x -> phi(x + t)``; the support box moves by ``-t``."""
        t = tuple(to_fraction(v) for v in t)
        base = self.phi

        def phi(x):
            return base([xi + ti for xi, ti in zip(x, t)])

        sup = tuple((lo - ti, hi - ti) for (lo, hi), ti in zip(self.support, t))
        off = tuple(o + ti for o, ti in zip(self.offset, t))
        return Generator(phi, sup, self.sup_norm, self.name, off)

    @property
    def shift_set(self) -> tuple:
        """Integer ``n`` with ``phi(x - n)`` not identically 0 on ``[0,1)^d``."""
        axes = []
        for lo, hi in self.support:
            # need n + lo < 1 and n + hi > 0
            first = math.floor(-hi) + 1
            last = math.ceil(1 - lo) - 1
            axes.append(range(first, last + 1))
        return tuple(product(*axes))

    @property
    def C(self) -> int:
        return len(self.shift_set)

    def active_shifts(self, y) -> list:
        """Integer ``n`` with ``y - n`` inside the open support box."""
        axes = []
        for yi, (lo, hi) in zip(y, self.support):
            first = math.floor(yi - hi) + 1
            last = math.ceil(yi - lo) - 1
            axes.append(range(first, last + 1))
        return list(product(*axes))


def _hat1(t):
    if t <= 0 or t >= 2:
        return t * 0
    return t if t <= 1 else 2 - t


def hat_generator(d: int = 1) -> Generator:
    """Tensor hat ``N_2^d`` (support ``[0, 2]^d``)."""

    def phi(x):
        out = 1
        for xi in x:
            out = out * _hat1(xi)
        return out

    return Generator(phi, ((0, 2),) * d, 1, "bspline:k=2")


_REGISTRY: dict = {}


def register_generator(name: str, factory: Callable[[int], Generator]) -> None:
    """Register ``factory(d) -> Generator`` under ``name`` for JSON loading."""
    _REGISTRY[name] = factory


def generator_from_name(name: str, d: int) -> Generator:
    if name.startswith("bspline:"):
        key, _, val = name.partition(":")[2].partition("=")
        if key != "k":
            raise ValueError(f"bad generator spec {name!r}")
        k = int(val)
        if k == 2:
            return hat_generator(d)
        from .splines import bspline_generator

        return bspline_generator(k, d)
    if name in _REGISTRY:
        return _REGISTRY[name](d)
    raise ValueError(f"unknown generator {name!r}")


def hat_net(d: int = 1, N: int = 1, L: int = 1) -> tuple[ReluNet, Fraction]:
    """Network for ``N_2^d`` and a certificate bounding its sup error.

    For d = 1 the hat ``relu(x) - 2 relu(x-1) + relu(x-2)`` is exact.  For d > 1
    the factors are multiplied with the product approximator.
    """
    l1 = AffineLayer({(0, 0): 1, (1, 0): 1, (2, 0): 1}, [0, -1, -2], shape=(3, 1))
    l2 = AffineLayer({(0, 0): 1, (0, 1): -2, (0, 2): 1}, [0], shape=(1, 3))
    h = ReluNet([l1, l2], name="hat")
    if d == 1:
        return h, Fraction(0)
    from .gadgets import product_approx

    prod = product_approx(d, N, L)
    net = compose(stack([h] * d, pad_sign="nonneg"), prod)
    err = 9 * (d - 1) * Fraction(1, (N + 1) ** (7 * d * L))
    return ReluNet(net.layers, name=f"hat{d}"), err


# --------------------------------------------------------------------------
# SIS functions


def _key(n) -> tuple:
    return tuple(int(v) for v in (n if isinstance(n, (list, tuple)) else (n,)))


@dataclass(frozen=True)
class SisFunction:
    """``g(x) = sum_n c_n phi(2^j x - n)`` with ``|c_n| < M``."""

    j: int
    coeffs: dict
    M: Fraction
    generator: Generator
    meta: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        if self.j < 0:
            raise ValueError("j must be >= 0")
        coeffs = {}
        for n, c in dict(self.coeffs).items():
            key = _key(n)
            if len(key) != self.generator.d:
                raise ValueError(f"index {key} does not match dimension {self.generator.d}")
            c = to_fraction(c)
            if c:
                coeffs[key] = c
        M = to_fraction(self.M)
        if not M > 0:
            raise ValueError("M must be positive")
        bad = [n for n, c in coeffs.items() if abs(c) >= M]
        if bad:
            raise ValueError(f"coefficient at {bad[0]} violates |c| < M = {M}")
        object.__setattr__(self, "coeffs", coeffs)
        object.__setattr__(self, "M", M)

    @property
    def d(self) -> int:
        return self.generator.d

    def coeff(self, n) -> Fraction:
        return self.coeffs.get(_key(n), Fraction(0))

    def __call__(self, x):
        return eval_sis(self, x)

    # JSON --------------------------------------------------------------
    def to_json(self) -> str:
        doc = {
            "j": self.j,
            "d": self.d,
            "M": float(self.M),
            "generator": self.generator.name,
            "coeffs": [{"n": list(n), "c": float(c)} for n, c in sorted(self.coeffs.items())],
        }
        return json.dumps(doc)

    @classmethod
    def from_json(cls, text) -> "SisFunction":
        doc = json.loads(text)
        try:
            d = int(doc["d"])
            gen = generator_from_name(doc["generator"], d)
            coeffs = {_key(e["n"]): Fraction(e["c"]) for e in doc["coeffs"]}
            return cls(int(doc["j"]), coeffs, Fraction(doc["M"]), gen)
        except (KeyError, TypeError) as exc:
            raise ValueError(f"malformed SIS document: {exc}") from exc


def _coords(x, d):
    if np.ndim(x) == 0:
        x = [x]
    x = list(x)
    if len(x) != d:
        raise ValueError(f"expected a point of dimension {d}, got {len(x)}")
    return x


def eval_sis(g: SisFunction, x):
    """Direct sum over the shifts whose support meets ``2^j x``."""
    x = _coords(x, g.d)
    y = [xi * 2 ** g.j for xi in x]
    total = 0
    for n in g.generator.active_shifts(y):
        c = g.coeffs.get(n)
        if c is not None:
            total = total + c * g.generator([yi - ni for yi, ni in zip(y, n)])
    return total


def m_r_split(x, j: int):
    """``(floor(2^j x), 2^j x - floor(2^j x))`` coordinate-wise, for x in ``[0,1)^d``."""
    x = _coords(x, len(x) if np.ndim(x) else 1)
    m, r = [], []
    for xi in x:
        if not 0 <= xi < 1:
            raise ValueError(f"coordinate {xi} outside [0, 1)")
        y = xi * 2 ** j
        mi = math.floor(y)
        m.append(mi)
        r.append(y - mi)
    return tuple(m), tuple(r)


def localize(g: SisFunction, x):
    """``sum_{k in shift set} c_{m_j(x)+k} phi(r_j(x) - k)`` for x in ``[0,1)^d``."""
    m, r = m_r_split(_coords(x, g.d), g.j)
    total = 0
    for k in g.generator.shift_set:
        c = g.coeffs.get(tuple(mi + ki for mi, ki in zip(m, k)))
        if c is not None:
            total = total + c * g.generator([ri - ki for ri, ki in zip(r, k)])
    return total


def coeff_bits(g: SisFunction, depth: int, k=None) -> BitTable:
    """Leading ``depth`` bits of ``c_{m+k}/(2M) + 1/2`` for every cell ``m``.

    Rows follow ``itertools.product(range(2^j), repeat=d)`` order and the points
    are the cell indices ``m``.
    """
    d = g.d
    k = tuple(k) if k is not None else (0,) * d
    cells = list(product(range(2 ** g.j), repeat=d))
    rows = []
    for m in cells:
        c = g.coeff(tuple(mi + ki for mi, ki in zip(m, k))) / g.M
        rows.append(bits_of(c / 2 + Fraction(1, 2), depth))
    return BitTable(tuple(cells), tuple(rows))


# --------------------------------------------------------------------------
# parameters and q packing


@dataclass(frozen=True)
class ApproxParams:
    r: int
    s: int
    r_tilde: int
    s_tilde: int
    epsilon: Fraction
    delta: Fraction

    def __post_init__(self):
        object.__setattr__(self, "epsilon", to_fraction(self.epsilon))
        object.__setattr__(self, "delta", to_fraction(self.delta))
        if min(self.r, self.r_tilde, self.s_tilde) < 1 or self.s < 0:
            raise ValueError("r, r_tilde, s_tilde must be >= 1 and s >= 0")
        if not 0 < self.epsilon < 1:
            raise ValueError("epsilon must lie in (0, 1)")
        if self.r_tilde * self.s_tilde < self.bits_needed:
            raise ValueError(
                f"r_tilde * s_tilde = {self.r_tilde * self.s_tilde} < {self.bits_needed} bits"
            )
        if not self.delta > 0:
            raise ValueError("delta must be positive")

    @property
    def bits_needed(self) -> int:
        return math.ceil(math.log2(1 / self.epsilon)) + 1

    def check(self, j: int, d: int, uniform: bool = False) -> None:
        if 2 * (self.s + self.r) < d * j:
            raise ValueError(f"need 2(s + r) >= d j, got 2({self.s}+{self.r}) < {d * j}")
        limit = Fraction(1, 2 ** j) / (3 if uniform else 1)
        if not self.delta < limit:
            raise ValueError(f"delta must be < {limit}")


def split_points(j: int, d: int, s: int) -> tuple:
    """``k_1..k_d`` with ``sum (j - k_m) = s``, spread evenly, extra to leading axes."""
    s = min(s, j * d)
    base, extra = divmod(s, d)
    low = [base + (1 if m < extra else 0) for m in range(d)]
    return tuple(j - lm for lm in low)


def q_index(low_bits, split: tuple, j: int) -> int:
    """Pack the low bits ``x_{m, k_m+1..j}`` of every coordinate into ``{1..2^s}``."""
    if len(low_bits) != len(split):
        raise ValueError("one bit list per coordinate is required")
    q = 1
    offset = 0
    for bits, km in zip(low_bits, split):
        if len(bits) != j - km:
            raise ValueError(f"coordinate with split {km} needs {j - km} low bits, got {len(bits)}")
        val = sum(b << (j - km - 1 - i) for i, b in enumerate(bits))
        q += val << offset
        offset += j - km
    return q


def _cell_code(m, split, j):
    """``(H, q)`` for cell ``m``: high-bit sums and the packed low part."""
    H = []
    lows = []
    for mi, km in zip(m, split):
        w = j - km
        H.append((mi >> w) << w)
        lows.append(bits_of(Fraction(mi % (1 << w), 1 << w), w) if w else [])
    return tuple(H), q_index(lows, split, j)


# --------------------------------------------------------------------------
# networks


def _offset_carry(dim: int, depth: int, offset) -> ReluNet:
    """Identity on values ``>= -offset`` via ``relu(v + offset) - offset``."""
    offset = to_fraction(offset)
    net = passthrough(dim, "nonneg", depth)
    pre = linear_net({(i, i): 1 for i in range(dim)}, [offset] * dim, shape=(dim, dim))
    post = linear_net({(i, i): 1 for i in range(dim)}, [-offset] * dim, shape=(dim, dim))
    return compose(compose(pre, net), post)


_A_OFF = 2  # |phi0 / ||phi||| <= 1 + eps < 2
_ACC_OFF = 8  # running sum stays in [-4, 4]; gate folding subtracts up to 4 more


def _phi0_normalized(phi0: ReluNet, scale: Fraction, shift) -> ReluNet:
    """``y -> phi0(y + shift) * scale``."""
    d = phi0.input_dim
    pre = linear_net({(i, i): 1 for i in range(d)}, list(shift), shape=(d, d))
    post = linear_net([[scale]])
    return compose(compose(pre, phi0), post)


def _term_net(g: SisFunction, gen: Generator, k, params: ApproxParams, phi0: ReluNet) -> ReluNet:
    j, d = g.j, g.d
    s = min(params.s, j * d)
    split = split_points(j, d, s)
    nbits = params.r_tilde * params.s_tilde
    norm = Fraction(1) / gen.sup_norm

    # stage 1: per-coordinate (S1, S2, R) then (H_1..H_d, q, R_1..R_d)
    heads = [split_weighted_bits(j, params.delta, params.r, km) for km in split]
    st1 = stack(heads, pad_sign="nonneg")
    e, bias = {}, [0] * (2 * d + 1)
    offset = 0
    for m, km in enumerate(split):
        e[(m, 3 * m)] = 1
        e[(d, 3 * m + 1)] = 2 ** offset
        e[(d + 1 + m, 3 * m + 2)] = 1
        offset += j - km
    bias[d] = 1
    st1 = compose(st1, linear_net(e, bias, shape=(2 * d + 1, 3 * d)))

    # stage 2: (H, q, R) -> (H, q, a, acc = 0) with a = phi0(R - k + t) / ||phi||
    shift = [gen.offset[c] - k[c] for c in range(d)]
    p0 = _phi0_normalized(phi0, norm, shift)
    st2 = parallel(
        [passthrough(d + 1, "nonneg", p0.depth), p0],
        input_maps=[list(range(d + 1)), list(range(d + 1, 2 * d + 1))],
        pad_sign="nonneg",
    )
    st2 = compose(st2, linear_net({(i, i): 1 for i in range(d + 2)}, shape=(d + 3, d + 2)))
    net = compose(st1, st2)

    # bit tables over cells m in [0, 2^j)^d for coefficient index m + k
    cells = list(product(range(2 ** j), repeat=d))
    codes = [_cell_code(m, split, j) for m in cells]
    Hs = sorted({c[0] for c in codes})
    hrow = {H: i for i, H in enumerate(Hs)}
    cols = 2 ** s
    Np = max(1, math.ceil(math.sqrt(len(Hs) / cols)))
    while Np * Np * cols < len(Hs):
        Np += 1
    tables = []
    for i in range(nbits):
        rows = [[0] * cols for _ in Hs]
        tables.append(rows)
    for m, (H, q) in zip(cells, codes):
        c = g.coeff(tuple(mi + ki for mi, ki in zip(m, k))) / g.M
        b = bits_of(c / 2 + Fraction(1, 2), nbits)
        for i in range(nbits):
            tables[i][hrow[H]][q - 1] = b[i]

    # stages 3..: s_tilde blocks of r_tilde bit interpolators fused by the gate
    width_in = d + 3  # H (d), q, a, acc
    for blk in range(params.s_tilde):
        idx = range(blk * params.r_tilde, (blk + 1) * params.r_tilde)
        fits = [fit_bit_samples(BitTable(tuple(Hs), tuple(map(tuple, tables[i]))), Np, cols)
                for i in idx]
        depth = max(f.depth for f in fits)
        hq = list(range(d + 1))
        body = parallel(
            fits + [passthrough(d + 1, "nonneg", depth),
                    _offset_carry(1, depth, _A_OFF),
                    _offset_carry(1, depth, _ACC_OFF)],
            input_maps=[hq] * len(fits) + [hq, [d + 1], [d + 2]],
            pad_sign="nonneg",
        )
        # gate layer on (bits..., H, q, a, acc)
        R = len(fits)
        e, bias = {}, []
        a_col, acc_col = R + d + 1, R + d + 2
        for t, i in enumerate(idx):
            e[(t, t)] = 1
            e[(t, a_col)] = Fraction(1, 4)
            bias.append(Fraction(-1, 2))
        for c in range(d + 1):
            e[(R + c, R + c)] = 1
            bias.append(0)
        e[(R + d + 1, a_col)] = 1
        bias.append(_A_OFF)
        e[(R + d + 2, acc_col)] = 1
        for t, i in enumerate(idx):
            e[(R + d + 2, t)] = -2 * Fraction(2, 2 ** (i + 1))
        bias.append(_ACC_OFF)
        hidden = AffineLayer(e, bias, shape=(R + d + 3, R + d + 3))
        e = {}
        for c in range(d + 1):
            e[(c, R + c)] = 1
        e[(d + 1, R + d + 1)] = 1
        e[(d + 2, R + d + 2)] = 1
        for t, i in enumerate(idx):
            e[(d + 2, t)] = 4 * Fraction(2, 2 ** (i + 1))
        out = AffineLayer(e, [0] * (d + 1) + [-_A_OFF, -_ACC_OFF], shape=(width_in, R + d + 3))
        net = compose(net, compose(body, ReluNet([hidden, out])))

    # output: (acc - a) * M ||phi||
    scale = g.M * gen.sup_norm
    net = compose(net, linear_net({(0, d + 1): -scale, (0, d + 2): scale}, shape=(1, d + 3)))
    return net


def _check_phi0(g: SisFunction, params: ApproxParams, phi0: ReluNet, phi0_err) -> None:
    if phi0_err is None:
        raise ValueError("a phi0 error certificate is required")
    if phi0.input_dim != g.d or phi0.output_dim != 1:
        raise ValueError("phi0 must map R^d to R")
    if to_fraction(phi0_err) > params.epsilon * g.generator.sup_norm:
        raise ValueError("phi0 certificate exceeds epsilon * ||phi||_inf")


def build_term_net(g: SisFunction, k, params: ApproxParams, phi0: ReluNet, phi0_err) -> ReluNet:
    """Network for ``x -> c_{m_j(x)+k} phi(r_j(x) - k)`` on ``Q(j, delta, d)``.

    Error at most ``3 eps M ||phi||``.
    """
    params.check(g.j, g.d)
    _check_phi0(g, params, phi0, phi0_err)
    k = _key(k)
    return ReluNet(_term_net(g, g.generator, k, params, phi0).layers, name=f"term{k}")


def _q_net(g: SisFunction, gen: Generator, params: ApproxParams, phi0: ReluNet) -> ReluNet:
    terms = [_term_net(g, gen, k, params, phi0) for k in gen.shift_set]
    summed = compose(stack(terms) if len(terms) > 1 else terms[0],
                     linear_net([[1] * len(terms)]))
    if len(terms) > 1:
        d = g.d
        summed = compose(
            linear_net({(t * d + c, c): 1 for t in range(len(terms)) for c in range(d)},
                       shape=(len(terms) * d, d)),
            summed,
        )
    return summed


def build_q_net(g: SisFunction, params: ApproxParams, phi0: ReluNet, phi0_err) -> ReluNet:
    """Sum of term networks over the shift set; error ``<= 3 C M ||phi|| eps`` on Q."""
    params.check(g.j, g.d)
    _check_phi0(g, params, phi0, phi0_err)
    return ReluNet(_q_net(g, g.generator, params, phi0).layers, name="q_net")


def _uniform(g, gen, params, phi0, level):
    if level == 0:
        return _q_net(g, gen, params, phi0)
    d = g.d
    axis = level - 1
    delta = params.delta
    e_t = [Fraction(0)] * d
    e_t[axis] = delta * 2 ** g.j
    minus_t = [-v for v in e_t]
    center = _uniform(g, gen, params, phi0, level - 1)
    plus = _uniform(g, gen.shifted(e_t), params, phi0, level - 1)
    minus = _uniform(g, gen.shifted(minus_t), params, phi0, level - 1)
    # inputs: x, x - delta e, x + delta e
    e, bias = {}, [Fraction(0)] * (3 * d)
    for b in range(3):
        for c in range(d):
            e[(b * d + c, c)] = 1
    bias[d + axis] = -delta
    bias[2 * d + axis] = delta
    fan = linear_net(e, bias, shape=(3 * d, d))
    three = stack([center, plus, minus])
    return compose(compose(fan, three), mid3())


def build_uniform_net(g: SisFunction, params: ApproxParams, phi0: ReluNet, phi0_err) -> ReluNet:
    """Mid-value lift of the punctured-cube network to all of ``[0,1]^d``.

    Error ``<= 6 C M ||phi|| eps``; depth is that of :func:`build_q_net` plus 2d.
    """
    params.check(g.j, g.d, uniform=True)
    _check_phi0(g, params, phi0, phi0_err)
    return ReluNet(_uniform(g, g.generator, params, phi0, g.d).layers, name="uniform_net")


def q_net_budget(g: SisFunction, params: ApproxParams, phi0: ReluNet) -> tuple[int, int]:
    """``(width, depth)`` allowed for the punctured-cube network."""
    d = g.d
    N = max(7 * d * params.r_tilde * 2 ** params.r, phi0.width) + 4 * d
    L = 14 * params.s_tilde * 2 ** params.s + phi0.depth
    return g.generator.C * N, L


def term_net_budget(g: SisFunction, params: ApproxParams, phi0: ReluNet) -> tuple[int, int]:
    d = g.d
    N = max(7 * d * params.r_tilde * 2 ** params.r, phi0.width) + 4 * d
    return N, 14 * params.s_tilde * 2 ** params.s + phi0.depth


def uniform_net_budget(g: SisFunction, params: ApproxParams, phi0: ReluNet) -> tuple[int, int]:
    width, depth = q_net_budget(g, params, phi0)
    d = g.d
    return 3 ** d * 2 * width, depth + 2 * d


# --------------------------------------------------------------------------
# rates


def rate_compose(alpha: float, beta: float, d: int, N: float, L: float) -> float:
    """Predicted error scale for an order-``alpha`` generator and smoothness ``beta``.

    ``(NL / (log2 N log2 L))^(-2 beta / d)`` when ``alpha >= 2 beta / d``,
    otherwise ``(NL)^(-alpha)``.  The boundary (up to float rounding) goes
    to the first branch.
    """
    if N < 2 or L < 2:
        raise ValueError("N and L must be >= 2")
    if alpha <= 0 or beta <= 0 or d < 1:
        raise ValueError("alpha, beta must be positive and d >= 1")
    crit = 2 * beta / d
    case1 = (N * L / (math.log2(N) * math.log2(L))) ** (-crit)
    case2 = (N * L) ** (-alpha)
    if alpha >= crit or math.isclose(alpha, crit, rel_tol=1e-12, abs_tol=0.0):
        return case1
    return case2


def q_domain(g: SisFunction, params: ApproxParams) -> QDomain:
    return QDomain(g.j, params.delta, g.d)
