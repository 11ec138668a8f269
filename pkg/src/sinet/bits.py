"""Bit extraction on the punctured cube.

Networks here are exact only on ``Q(j, delta, 1)``: the unit interval with the
open slabs ``(k 2^-j - delta, k 2^-j)`` removed.  Inside those slabs the output
is whatever the continuous interpolation gives and is never relied upon.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from itertools import product

import numpy as np

from .gadgets import IndicatorSpec, soft_indicator
from .netcore import (
    AffineLayer,
    ReluNet,
    compose,
    linear_net,
    passthrough,
    stack,
    to_fraction,
)

__all__ = [
    "DyadicPoint",
    "QDomain",
    "extract_bits",
    "split_weighted_bits",
    "select_bit",
    "bits_of",
]


def bits_of(x, count: int) -> list[int]:
    """First ``count`` binary digits of ``x`` in [0, 1) (terminating expansion)."""
    x = to_fraction(x)
    if not 0 <= x < 1:
        raise ValueError(f"{x} is outside [0, 1)")
    out = []
    for _ in range(count):
        x *= 2
        b = int(x >= 1)
        out.append(b)
        x -= b
    return out


@dataclass(frozen=True)
class DyadicPoint:
    """A point ``Bin 0.b_1 b_2 ... b_n`` with a finite expansion."""

    bits: tuple

    def __post_init__(self):
        object.__setattr__(self, "bits", tuple(int(b) for b in self.bits))
        if any(b not in (0, 1) for b in self.bits):
            raise ValueError("bits must be 0 or 1")

    @classmethod
    def from_value(cls, x) -> "DyadicPoint":
        x = to_fraction(x)
        den = x.denominator
        if den & (den - 1):
            raise ValueError(f"{x} is not a dyadic rational")
        n = den.bit_length() - 1
        return cls(tuple(bits_of(x, n)))

    @property
    def value(self) -> Fraction:
        return sum((Fraction(b, 2 ** (i + 1)) for i, b in enumerate(self.bits)), Fraction(0))

    def __float__(self):
        return float(self.value)

    def bit(self, i: int) -> int:
        """``i``-th bit (1-based); zero beyond the stored expansion."""
        return self.bits[i - 1] if i <= len(self.bits) else 0

    def tail(self, r: int) -> Fraction:
        """``Bin 0.b_{r+1} b_{r+2} ...``."""
        return DyadicPoint(self.bits[r:]).value


@dataclass(frozen=True)
class QDomain:
    """``Q(j, delta, d)``: product of ``[0,1)`` minus the slabs left of ``k 2^-j``."""

    j: int
    delta: float
    d: int = 1

    def __post_init__(self):
        if self.j < 1 or self.d < 1:
            raise ValueError("j and d must be positive")
        if not 0 < to_fraction(self.delta) < Fraction(1, 2 ** self.j):
            raise ValueError("need 0 < delta < 2^-j")

    def kept_intervals(self) -> list[tuple[Fraction, Fraction]]:
        """Closed intervals ``[k 2^-j, (k+1) 2^-j - delta]`` (last one open at 1)."""
        h = Fraction(1, 2 ** self.j)
        dl = to_fraction(self.delta)
        n = 2 ** self.j
        return [(k * h, (k + 1) * h - (dl if k < n - 1 else 0)) for k in range(n)]

    def contains_1d(self, t) -> bool:
        t = to_fraction(t)
        if not 0 <= t < 1:
            return False
        scaled = t * 2 ** self.j
        k = math.floor(scaled)
        nxt = Fraction(k + 1, 2 ** self.j)
        return k + 1 == 2 ** self.j or t <= nxt - to_fraction(self.delta)

    def __contains__(self, x) -> bool:
        coords = np.atleast_1d(np.asarray(x, dtype=object))
        if coords.shape != (self.d,):
            raise ValueError(f"expected a point of dimension {self.d}")
        return all(self.contains_1d(c) for c in coords)

    def complement_measure(self) -> float:
        """Lebesgue measure of ``[0,1]^d`` minus ``Q``."""
        return 1.0 - (1.0 - (2 ** self.j - 1) * float(self.delta)) ** self.d

    def grid_1d(self, level: int) -> list[Fraction]:
        """All multiples of ``2^-level`` in ``Q(j, delta, 1)``."""
        n = 2 ** level
        return [Fraction(i, n) for i in range(n) if self.contains_1d(Fraction(i, n))]

    def grid(self, level: int) -> np.ndarray:
        """Tensor grid of :meth:`grid_1d` points as an ``(n, d)`` object array."""
        axis = self.grid_1d(level)
        pts = list(product(axis, repeat=self.d))
        out = np.empty((len(pts), self.d), dtype=object)
        for i, p in enumerate(pts):
            out[i] = p
        return out


# --------------------------------------------------------------------------
# networks


def _indicator_layers(r: int, delta: Fraction):
    """First two layers of the ``2^r`` soft indicators of the dyadic cells of level r."""
    nets = []
    h = Fraction(1, 2 ** r)
    for k in range(2 ** r - 1):
        nets.append(soft_indicator(IndicatorSpec(k * h, (k + 1) * h - delta, delta)))
    nets.append(soft_indicator(IndicatorSpec(1 - h, Fraction(1), delta)))
    return nets


def _extract_core(r: int, delta: Fraction) -> ReluNet:
    """``x -> (ind_0, ..., ind_{2^r-1}, x)``, depth 3, width ``2^(r+1) + 1``."""
    inds = _indicator_layers(r, delta)
    return compose(
        linear_net({(i, 0): 1 for i in range(len(inds) + 1)}, shape=(len(inds) + 1, 1)),
        stack(inds + [passthrough(1, "nonneg", 3)]),
    )


def _bit_readout(r: int):
    """Weights turning cell indicators into the ``r`` leading bits."""
    rows = {}
    for cell in range(2 ** r):
        for i, b in enumerate(bits_of(Fraction(cell, 2 ** r), r)):
            if b:
                rows[(i, cell)] = 1
    return rows


def extract_bits(j: int, delta, r: int) -> ReluNet:
    """``x -> (x_1, ..., x_r, Bin 0.x_{r+1} x_{r+2} ...)`` on ``Q(j, delta, 1)``.

    Width ``2^(r+1) + 1``, depth 3.
    """
    delta = to_fraction(delta)
    if not 1 <= r <= j:
        raise ValueError("need 1 <= r <= j")
    if not 0 < delta < Fraction(1, 2 ** j):
        raise ValueError("need 0 < delta < 2^-j")
    core = _extract_core(r, delta)
    n = 2 ** r
    e = _bit_readout(r)
    # tail = 2^r x - sum 2^(r-i) x_i
    for (i, cell) in list(e):
        e[(r, cell)] = e.get((r, cell), 0) - 2 ** (r - 1 - i)
    e[(r, n)] = 2 ** r
    return ReluNet(compose(core, linear_net(e, shape=(r + 1, n + 1))).layers,
                   name=f"extract_bits(r={r})")


def _stage_sizes(j: int, r: int) -> list[int]:
    full, rest = divmod(j, r)
    return [r] * full + ([rest] if rest else [])


def split_weighted_bits(j: int, delta, r: int, k: int) -> ReluNet:
    """``x -> (sum_{i<=k} 2^(j-i) x_i, sum_{k<i<=j} 2^(j-i) x_i, Bin 0.x_{j+1} ...)``.

    Bits are peeled ``r`` at a time; the two partial sums are nonnegative and
    ride along in one neuron each.  Width ``2^(r+1) + 3``, depth ``2 ceil(j/r) + 1``.
    """
    delta = to_fraction(delta)
    if not 0 <= k <= j:
        raise ValueError("need 0 <= k <= j")
    if r < 1:
        raise ValueError("r must be >= 1")
    if not 0 < delta < Fraction(1, 2 ** j):
        raise ValueError("need 0 < delta < 2^-j")
    r = min(r, j)
    net = None
    done = 0
    for rt in _stage_sizes(j, r):
        core = _extract_core(rt, delta * 2 ** done)
        n = 2 ** rt
        read = _bit_readout(rt)
        # outputs: tail, S1, S2 from (cells..., y, S1, S2)
        e = {(0, n): 2 ** rt}
        for (i, cell) in read:
            e[(0, cell)] = e.get((0, cell), 0) - 2 ** (rt - 1 - i)
            gi = done + i + 1
            row = 1 if gi <= k else 2
            e[(row, cell)] = e.get((row, cell), 0) + 2 ** (j - gi)
        if net is None:
            stage = compose(core, linear_net(e, shape=(3, n + 1)))
            net = stage
        else:
            e[(1, n + 1)] = 1
            e[(2, n + 2)] = 1
            stage = compose(stack([core, passthrough(2, "nonneg", 3)]),
                            linear_net(e, shape=(3, n + 3)))
            net = compose(net, stage)
        done += rt
    # reorder (tail, S1, S2) -> (S1, S2, tail)
    net = compose(net, linear_net({(0, 1): 1, (1, 2): 1, (2, 0): 1}, shape=(3, 3)))
    return ReluNet(net.layers, name=f"split_weighted_bits(j={j},r={r},k={k})")


def _select_stage(rt: int, offset: int, delta: Fraction) -> ReluNet:
    """Inputs ``(y, k, acc)``; outputs ``(tail, k, acc + sum_i [k = offset+i] y_i)``.

    All carried values are nonnegative.  Depth 5, width ``max(2^(r+1), 4r) + 3``.
    """
    n = 2 ** rt
    core = _extract_core(rt, delta)  # (y) -> cells..., y ; depth 3
    # layers 1-2: indicator cells, y, k, acc
    head = stack([core, passthrough(2, "nonneg", 3)])
    # layer 3 pre-activations from (cells, y, k, acc)
    read = _bit_readout(rt)
    e = {}
    bias = []
    row = 0
    for i in range(rt):
        gi = offset + i + 1
        for sh in (1, -1, 0):  # relu(k - gi + 1), relu(k - gi - 1), relu(k - gi)
            e[(row, n + 1)] = 1
            bias.append(sh - gi)
            row += 1
    for i in range(rt):
        for (bi, cell) in read:
            if bi == i:
                e[(row, cell)] = 1
        bias.append(0)
        row += 1
    # tail
    e[(row, n)] = 2 ** rt
    for (bi, cell) in read:
        e[(row, cell)] = e.get((row, cell), 0) - 2 ** (rt - 1 - bi)
    bias.append(0)
    row += 1
    e[(row, n + 1)] = 1
    e[(row + 1, n + 2)] = 1
    bias += [0, 0]
    l3 = AffineLayer(e, bias, shape=(4 * rt + 3, n + 3))
    # layer 4: relu(delta_ki + x_i - 1), tail, k, acc
    e = {}
    for i in range(rt):
        e[(i, 3 * i)] = 1
        e[(i, 3 * i + 1)] = 1
        e[(i, 3 * i + 2)] = -2
        e[(i, 3 * rt + i)] = 1
    for c in range(3):
        e[(rt + c, 4 * rt + c)] = 1
    l4 = AffineLayer(e, [-1] * rt + [0, 0, 0], shape=(rt + 3, 4 * rt + 3))
    # output: (tail, k, acc + sum)
    e = {(0, rt): 1, (1, rt + 1): 1, (2, rt + 2): 1}
    for i in range(rt):
        e[(2, i)] = 1
    l5 = AffineLayer(e, [0, 0, 0], shape=(3, rt + 3))
    return compose(head, ReluNet([l3, l4, l5]))


def select_bit(r: int, K: int) -> ReluNet:
    """``(x, k) -> x_k`` for ``x = Bin 0.x_1...x_K`` and integer ``1 <= k <= K``.

    Width ``2^(r+1) + 3``, depth ``4 ceil(K/r) + 1``.
    """
    if not 1 <= r <= K:
        raise ValueError("need 1 <= r <= K")
    delta = Fraction(1, 2 ** (K + 1))
    # (x, k) -> (x, k, 0)
    net = linear_net({(0, 0): 1, (1, 1): 1}, shape=(3, 2))
    done = 0
    for rt in _stage_sizes(K, r):
        net = compose(net, _select_stage(rt, done, delta * 2 ** done))
        done += rt
    net = compose(net, linear_net({(0, 2): 1}, shape=(1, 3)))
    return ReluNet(net.layers, name=f"select_bit(r={r},K={K})")
