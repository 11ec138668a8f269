"""Small reusable ReLU constructions.

Soft indicators, the binary product gate, min/max/mid, teeth (sawtooth)
functions, the square and product approximators, and the support window used
to clamp B-spline networks.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

from .netcore import (
    AffineLayer,
    ReluNet,
    chain,
    compose,
    linear_net,
    passthrough,
    stack,
    to_fraction,
)

__all__ = [
    "IndicatorSpec",
    "soft_indicator",
    "binary_gate",
    "max2",
    "min2",
    "minmax2",
    "max3",
    "min3",
    "mid3",
    "teeth",
    "teeth_value",
    "square_approx",
    "mul_approx",
    "product_approx",
    "product_levels",
    "clamp01",
    "support_window",
]


def _layer(entries, bias, n_in):
    return AffineLayer(entries, bias, shape=(len(bias), n_in))


@dataclass(frozen=True)
class IndicatorSpec:
    a: float
    b: float
    delta: float

    def __post_init__(self):
        if not self.delta > 0:
            raise ValueError("delta must be positive")
        if self.a > self.b:
            raise ValueError("need a <= b")


def soft_indicator(spec: IndicatorSpec) -> ReluNet:
    """1 on ``[a, b]``, 0 outside ``(a - delta, b + delta)``, linear ramps between."""
    a, b, d = (to_fraction(v) for v in (spec.a, spec.b, spec.delta))
    l1 = _layer({(0, 0): -1 / d, (1, 0): 1 / d}, [a / d, -b / d], 1)
    l2 = _layer({(0, 0): -1, (1, 1): -1}, [1, 1], 2)
    l3 = _layer({(0, 0): 1, (0, 1): 1}, [-1], 2)
    return ReluNet([l1, l2, l3], name="soft_indicator")


def support_window(k: int) -> ReluNet:
    """chi: 1 on ``[0, k]``, 0 outside ``[-1, k + 1]``."""
    if k < 1:
        raise ValueError("k must be >= 1")
    l1 = _layer({(0, 0): -1, (1, 0): 1}, [0, -k], 1)
    l2 = _layer({(0, 0): -1, (1, 1): -1}, [1, 1], 2)
    l3 = _layer({(0, 0): 1, (0, 1): 1}, [-1], 2)
    return ReluNet([l1, l2, l3], name="support_window")


def binary_gate() -> ReluNet:
    """``(a, b) -> 4 relu(b/4 + a - 1/2) - 2a``, equal to ``a*b`` for a in {0,1}, |b| <= 2.

    ``a`` rides through a single ReLU, which is exact because a >= 0.
    """
    h = Fraction(1, 2)
    l1 = _layer({(0, 0): 1, (0, 1): Fraction(1, 4), (1, 0): 1}, [-h, 0], 2)
    l2 = _layer({(0, 0): 4, (0, 1): -2}, [0], 2)
    return ReluNet([l1, l2], name="binary_gate")


# |x - y| and x + y from four ramps shared by max and min
_PAIR_ROWS = {(0, 0): 1, (0, 1): 1, (1, 0): -1, (1, 1): -1,
              (2, 0): 1, (2, 1): -1, (3, 0): -1, (3, 1): 1}
_MAX_COMB = (Fraction(1, 2), Fraction(-1, 2), Fraction(1, 2), Fraction(1, 2))
_MIN_COMB = (Fraction(1, 2), Fraction(-1, 2), Fraction(-1, 2), Fraction(-1, 2))


def max2() -> ReluNet:
    l1 = _layer(_PAIR_ROWS, [0] * 4, 2)
    l2 = _layer({(0, c): w for c, w in enumerate(_MAX_COMB)}, [0], 4)
    return ReluNet([l1, l2], name="max2")


def min2() -> ReluNet:
    l1 = _layer(_PAIR_ROWS, [0] * 4, 2)
    l2 = _layer({(0, c): w for c, w in enumerate(_MIN_COMB)}, [0], 4)
    return ReluNet([l1, l2], name="min2")


def minmax2() -> ReluNet:
    """``(x, y) -> (max, min)`` sharing one hidden layer of width 4."""
    l1 = _layer(_PAIR_ROWS, [0] * 4, 2)
    ent = {(0, c): w for c, w in enumerate(_MAX_COMB)}
    ent.update({(1, c): w for c, w in enumerate(_MIN_COMB)})
    return ReluNet([l1, _layer(ent, [0, 0], 4)], name="minmax2")


def _reduce3(pair: ReluNet, name: str) -> ReluNet:
    first = stack([pair, passthrough(1, "signed", 2)])
    return chain(first, pair, name=name)


def max3() -> ReluNet:
    return _reduce3(max2(), "max3")


def min3() -> ReluNet:
    return _reduce3(min2(), "min3")


def mid3() -> ReluNet:
    """Middle value of three reals: ``x + y + z - max - min``; width 10, depth 3."""
    # layer 1: four pair ramps of (x, y), +-z, +-(x+y+z)
    e1 = dict(_PAIR_ROWS)
    e1.update({(4, 2): 1, (5, 2): -1})
    for c in range(3):
        e1[(6, c)] = 1
        e1[(7, c)] = -1
    l1 = _layer(e1, [0] * 8, 3)
    # m = max(x,y), n = min(x,y), z, s as linear forms of layer-1 outputs
    m = {c: w for c, w in enumerate(_MAX_COMB)}
    n = {c: w for c, w in enumerate(_MIN_COMB)}
    z = {4: 1, 5: -1}

    def comb(*terms):
        out = {}
        for sign, form in terms:
            for c, w in form.items():
                out[c] = out.get(c, 0) + sign * w
        return out

    rows = [
        comb((1, m), (1, z)), comb((-1, m), (-1, z)), comb((1, m), (-1, z)), comb((-1, m), (1, z)),
        comb((1, n), (1, z)), comb((-1, n), (-1, z)), comb((1, n), (-1, z)), comb((-1, n), (1, z)),
        {6: 1, 7: -1}, {6: -1, 7: 1},
    ]
    e2 = {(i, c): w for i, row in enumerate(rows) for c, w in row.items() if w}
    l2 = _layer(e2, [0] * 10, 8)
    # out = s - max(m, z) - min(n, z)
    e3 = {}
    for c, w in enumerate(_MAX_COMB):
        e3[(0, c)] = -w
    for c, w in enumerate(_MIN_COMB):
        e3[(0, 4 + c)] = -w
    e3[(0, 8)] = 1
    e3[(0, 9)] = -1
    l3 = _layer(e3, [0], 10)
    return ReluNet([l1, l2, l3], name="mid3")


# --------------------------------------------------------------------------
# teeth and squaring


def teeth_value(i: int, x) -> Fraction:
    """Exact ``T_i(x)`` (the i-fold composed unit hat) for rational ``x``."""
    t = to_fraction(x)
    for _ in range(i):
        if t <= 0 or t >= 1:
            t = Fraction(0)
        elif t <= Fraction(1, 2):
            t = 2 * t
        else:
            t = 2 * (1 - t)
    return t


def _hat() -> ReluNet:
    l1 = _layer({(0, 0): 1, (1, 0): 1, (2, 0): 1}, [0, Fraction(-1, 2), -1], 1)
    l2 = _layer({(0, 0): 2, (0, 1): -4, (0, 2): 2}, [0], 3)
    return ReluNet([l1, l2], name="hat")


def teeth(i: int) -> ReluNet:
    """``T_i``: width 3, depth ``i + 1``, ``2^(i-1)`` teeth on [0, 1]."""
    if i < 1:
        raise ValueError("i must be >= 1")
    return chain(*[_hat()] * i, name=f"teeth{i}")


def _ramp_coeffs(fn, mu: int) -> list[Fraction]:
    """Coefficients ``c_k`` with ``fn(t) = sum_k c_k relu(t - k/2^mu)`` on [0, 1].

    ``fn`` must vanish at 0 and be linear between consecutive multiples of 2^-mu.
    """
    n = 2 ** mu
    grid = [Fraction(k, n) for k in range(n + 1)]
    vals = [fn(t) for t in grid]
    slopes = [(vals[k + 1] - vals[k]) * n for k in range(n)]
    return [slopes[0]] + [slopes[k] - slopes[k - 1] for k in range(1, n)]


def square_approx(s: int, mu: int = 1) -> ReluNet:
    """``x - sum_{i<=s} T_i(x)/4^i``, within ``2^(-2s-2)`` of ``x^2`` on [0, 1].

    Each hidden layer advances the teeth index by ``mu`` using the ramps
    ``relu(t - k/2^mu)`` of the current tooth ``t``, plus one neuron holding the
    (nonnegative) partial sum.  Width ``2^mu + 1``, depth ``s/mu + 1``.
    """
    if s < 1:
        raise ValueError("s must be >= 1")
    if mu < 1 or s % mu:
        raise ValueError("s must be a positive multiple of mu")
    n = 2 ** mu
    t_coef = _ramp_coeffs(lambda t: teeth_value(mu, t), mu)
    g_coef = _ramp_coeffs(
        lambda t: sum(teeth_value(l, t) / Fraction(4) ** l for l in range(1, mu + 1)), mu
    )
    # layer 1: ramps of x and acc = relu(x)
    e = {(k, 0): 1 for k in range(n + 1)}
    layers = [_layer(e, [-Fraction(k, n) for k in range(n)] + [0], 1)]
    blocks = s // mu
    for b in range(1, blocks):
        scale = Fraction(1, 4 ** ((b - 1) * mu))
        e = {}
        for k in range(n):
            for c, w in enumerate(t_coef):
                if w:
                    e[(k, c)] = w
        for c, w in enumerate(g_coef):
            if w:
                e[(n, c)] = -w * scale
        e[(n, n)] = 1
        layers.append(_layer(e, [-Fraction(k, n) for k in range(n)] + [0], n + 1))
    scale = Fraction(1, 4 ** ((blocks - 1) * mu))
    e = {(0, c): -w * scale for c, w in enumerate(g_coef) if w}
    e[(0, n)] = 1
    layers.append(_layer(e, [0], n + 1))
    return ReluNet(layers, name=f"square{s}")


def _polarize(sq: ReluNet) -> ReluNet:
    """``2(S((x+y)/2) - S(x/2) - S(y/2))`` for a square block ``S``."""
    h = Fraction(1, 2)
    pre = linear_net({(0, 0): h, (0, 1): h, (1, 0): h, (2, 1): h}, shape=(3, 2))
    post = linear_net({(0, 0): 2, (0, 1): -2, (0, 2): -2}, shape=(1, 3))
    return chain(pre, stack([sq, sq, sq]), post)


def mul_approx(s: int, range_: float = 1, mu: int = 1) -> ReluNet:
    """Approximate ``x*y`` on ``[0, range_]^2`` by polarization of squares.

    Inputs are scaled by ``1/range_`` and the output by ``range_^2``.  The error
    is at most ``range_^2 * 2^(-2s)``.
    """
    a = to_fraction(range_)
    if a <= 0:
        raise ValueError("range must be positive")
    net = _polarize(square_approx(s, mu))
    if a != 1:
        net = chain(linear_net({(0, 0): 1 / a, (1, 1): 1 / a}, shape=(2, 2)), net,
                    linear_net([[a * a]]))
    return ReluNet(net.layers, name=f"mul{s}")


def clamp01() -> ReluNet:
    """``relu(z) - relu(z - 1)``: clip to [0, 1]."""
    l1 = _layer({(0, 0): 1, (1, 0): 1}, [0, -1], 1)
    return ReluNet([l1, _layer({(0, 0): 1, (0, 1): -1}, [0], 2)], name="clamp01")


def product_levels(k: int, N: int, L: int) -> tuple[int, int]:
    """``(s, mu)`` for :func:`product_approx`.

    ``mu`` is the number of teeth levels packed per layer (``2^mu <= 3N + 1``)
    and ``s`` the smallest multiple of ``mu`` with ``2^(-2s) <= 9 (N+1)^(-7kL)``.
    """
    mu = max(1, int(math.floor(math.log2(3 * N + 1))))
    # 2s >= 7kL log2(N+1) - log2(9)
    need = 7 * k * L * math.log2(N + 1) - math.log2(9)
    s = max(1, math.ceil(need / 2))
    while Fraction(1, 4 ** s) > 9 * Fraction(1, (N + 1) ** (7 * k * L)):
        s += 1
    s = mu * math.ceil(s / mu)
    return s, mu


def product_approx(k: int, N: int, L: int) -> ReluNet:
    """``Phi_k``: approximate ``x_1 x_2 ... x_k`` on ``[0, 1]^k``.

    ``Phi_k(x) = Phi_2(Phi_{k-1}(x_1..x_{k-1}), x_k)`` where ``Phi_2`` is the
    polarized square block followed by a clip to [0, 1].  Any zero coordinate
    gives exactly 0.  Error at most ``(k-1) 2^(-2s) <= 9(k-1)(N+1)^(-7kL)``.
    """
    if k < 2:
        raise ValueError("k must be >= 2")
    if N < 1 or L < 1:
        raise ValueError("N and L must be >= 1")
    s, mu = product_levels(k, N, L)
    phi2 = compose(_polarize(square_approx(s, mu)), clamp01())
    net = phi2
    for m in range(3, k + 1):
        # Phi_{m-1} on the first m-1 inputs, x_m carried alongside (x_m >= 0)
        net = compose(stack([net, passthrough(1, "nonneg", net.depth)]), phi2)
    return ReluNet(net.layers, name=f"product{k}")
