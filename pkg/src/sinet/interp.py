"""Exact interpolation networks for real-valued and binary sample tables."""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass
from fractions import Fraction

from .bits import select_bit
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
    "SampleSet",
    "BitTable",
    "CapacityError",
    "projection_weights",
    "fit_point_samples",
    "fit_bit_samples",
    "read_bit_table",
]


class CapacityError(ValueError):
    """More samples than the requested architecture can interpolate."""


def _as_point(p):
    if isinstance(p, (list, tuple)):
        return tuple(to_fraction(v) for v in p)
    try:
        return tuple(to_fraction(v) for v in p)
    except TypeError:
        return (to_fraction(p),)


@dataclass(frozen=True)
class SampleSet:
    """Distinct points ``x_i`` in R^d with nonnegative targets ``y_i``."""

    points: tuple
    values: tuple
    dim: int = 0

    def __post_init__(self):
        pts = tuple(_as_point(p) for p in self.points)
        vals = tuple(to_fraction(v) for v in self.values)
        if len(pts) != len(vals):
            raise ValueError("points and values differ in length")
        dims = {len(p) for p in pts}
        if len(dims) > 1:
            raise ValueError("points have mixed dimensions")
        dim = dims.pop() if dims else (self.dim or 1)
        if self.dim and dim != self.dim:
            raise ValueError(f"points have dimension {dim}, expected {self.dim}")
        if len(set(pts)) != len(pts):
            raise ValueError("duplicate sample points")
        if any(v < 0 for v in vals):
            raise ValueError("sample values must be nonnegative")
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "values", vals)
        object.__setattr__(self, "dim", dim)

    def __len__(self):
        return len(self.points)


@dataclass(frozen=True)
class BitTable:
    """Distinct points with a row of 0/1 labels each (columns indexed 1..L)."""

    points: tuple
    bits: tuple
    dim: int = 0

    def __post_init__(self):
        pts = tuple(_as_point(p) for p in self.points)
        rows = tuple(tuple(int(b) for b in row) for row in self.bits)
        if len(pts) != len(rows):
            raise ValueError("row count differs from point count")
        if any(b not in (0, 1) for row in rows for b in row):
            raise ValueError("bit entries must be 0 or 1")
        if len({len(r) for r in rows}) > 1:
            raise ValueError("ragged bit rows")
        if len(set(pts)) != len(pts):
            raise ValueError("duplicate sample points")
        dims = {len(p) for p in pts}
        if len(dims) > 1:
            raise ValueError("points have mixed dimensions")
        dim = dims.pop() if dims else (self.dim or 1)
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "bits", rows)
        object.__setattr__(self, "dim", dim)

    @property
    def columns(self) -> int:
        return len(self.bits[0]) if self.bits else 0

    def packed(self, width: int | None = None) -> tuple:
        """``Bin 0.b_1 b_2 ... b_L`` per row."""
        return tuple(
            sum((Fraction(b, 2 ** (k + 1)) for k, b in enumerate(row)), Fraction(0))
            for row in self.bits
        )


def read_bit_table(source) -> BitTable:
    """Parse CSV with header ``x_1,...,x_d,b_1,...,b_L``."""
    if isinstance(source, str) and "\n" in source:
        fh = io.StringIO(source)
    elif isinstance(source, str):
        fh = open(source, newline="")
    else:
        fh = source
    with fh:
        reader = csv.reader(fh)
        header = [h.strip() for h in next(reader)]
        xcols = [i for i, h in enumerate(header) if h.startswith("x")]
        bcols = [i for i, h in enumerate(header) if h.startswith("b")]
        if len(xcols) + len(bcols) != len(header) or not xcols:
            raise ValueError(f"unexpected header {header}")
        pts, bits = [], []
        for line, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(header):
                raise ValueError(f"line {line}: expected {len(header)} fields")
            pts.append(tuple(Fraction(row[i].strip()) for i in xcols))
            bits.append(tuple(int(row[i]) for i in bcols))
    return BitTable(tuple(pts), tuple(bits))


def projection_weights(points) -> tuple:
    """Weights ``(1, P, P^2, ...)`` making ``x -> w . x`` injective on ``points``.

    ``P`` is the smallest integer >= 2 that separates the points.  The search
    stops at ``1 + spread/gap`` (largest coordinate range over the smallest
    positive coordinate difference), which always separates them; on a full
    integer grid that is ``1 + spread``.  Small ``P`` keeps the projected
    values, and hence float round-off, small.
    """
    pts = [tuple(p) for p in points]
    if not pts or len(pts[0]) == 1:
        return (Fraction(1),)
    d = len(pts[0])
    spread = Fraction(0)
    gap = None
    for c in range(d):
        vals = sorted({p[c] for p in pts})
        spread = max(spread, vals[-1] - vals[0])
        for a, b in zip(vals, vals[1:]):
            gap = b - a if gap is None else min(gap, b - a)
    cap = math.ceil(1 + spread / (gap or 1))
    for P in range(2, max(cap, 2) + 1):
        w = tuple(Fraction(P) ** c for c in range(d))
        if len({sum(wi * xi for wi, xi in zip(w, p)) for p in pts}) == len(pts):
            return w
    raise AssertionError("unreachable: 1 + spread/gap separates distinct points")


def _pow2_below(gap) -> Fraction:
    """Largest power of two ``<= gap / 2``."""
    gap = to_fraction(gap)
    e = math.floor(math.log2(gap)) - 1
    h = Fraction(2) ** e
    while h * 2 <= gap / 2:
        h *= 2
    while h > gap / 2:
        h /= 2
    return h


def _kink_pair(a, b):
    """Two kinks strictly inside ``(a, b)`` whose spacing is a power of two."""
    h = _pow2_below(b - a)
    return [a + h / 2, a + h]


def _ramp_basis(z_lo, pieces, after):
    """Kink positions for one block.

    Two kinks in ``(z_lo, first point)``, two in each gap between groups, two in
    ``(last point, after)``.  Power-of-two spacings keep the weights dyadic when
    the data is.
    """
    kinks = _kink_pair(z_lo, pieces[0][0])
    for g in range(len(pieces) - 1):
        kinks += _kink_pair(pieces[g][-1], pieces[g + 1][0])
    kinks += _kink_pair(pieces[-1][-1], after)
    return kinks


def _ramp_coefficients(kinks, affines):
    """Coefficients on ``relu(z - kink)`` for a piecewise-affine target.

    The target is 0 left of ``kinks[0]``, equals ``affines[g]`` (slope, offset)
    between kink pair ``g`` and ``g + 1``, and 0 right of the last kink.
    """
    coef = []
    slope, offset = Fraction(0), Fraction(0)
    targets = list(affines) + [(Fraction(0), Fraction(0))]
    for g, (ts, to) in enumerate(targets):
        k1, k2 = kinks[2 * g], kinks[2 * g + 1]
        # c1 relu(z-k1) + c2 relu(z-k2) adds (c1+c2) z - c1 k1 - c2 k2 right of k2
        ds, do = ts - slope, to - offset
        # c1 + c2 = ds, -c1 k1 - c2 k2 = do
        c2 = (-do - ds * k1) / (k2 - k1)
        c1 = ds - c2
        coef += [c1, c2]
        slope, offset = ts, to
    return coef


def _solve_group(pts, vals):
    """Kinks ``zeta_k`` and coefficients with ``sum_k c_k relu(p - zeta_k) = v`` at ``pts``."""
    zetas = [pts[0] - 1] + [pts[k] - _pow2_below(pts[k] - pts[k - 1]) for k in range(1, len(pts))]
    cs = []
    for i, p in enumerate(pts):
        partial = sum((c * (p - z) for c, z in zip(cs, zetas)), Fraction(0))
        cs.append((vals[i] - partial) / (p - zetas[i]))
    return zetas, cs


def fit_point_samples(samples: SampleSet, N: int, L: int) -> ReluNet:
    """Network with ``net(x_i) = y_i`` exactly; width <= 4N+4, depth <= L+2.

    Points are projected to a line, sorted and cut into at most ``L`` blocks of
    ``N`` groups of ``N`` points.  Block ``b`` is resolved in hidden layers
    ``b`` and ``b + 1``: first ``2N + 2`` ramps of the projected coordinate,
    then ``N`` signed pairs whose ReLUs reproduce the per-group interpolant and
    vanish on every sample outside the block.  A nonnegative accumulator
    collects the block outputs.
    """
    if N < 1 or L < 1:
        raise ValueError("N and L must be >= 1")
    M = len(samples)
    if M > N * N * L:
        raise CapacityError(f"{M} samples exceed the capacity N^2 L = {N * N * L}")
    d = samples.dim
    if M == 0:
        return linear_net({}, [0], shape=(1, d))
    w = projection_weights(samples.points)
    proj = [sum(wi * xi for wi, xi in zip(w, p)) for p in samples.points]
    shift = 1 - min(proj)
    order = sorted(range(M), key=lambda i: proj[i])
    z = [proj[i] + shift for i in order]
    y = [samples.values[i] for i in order]

    per_block = N * N
    blocks = [list(range(s, min(s + per_block, M))) for s in range(0, M, per_block)]
    B = len(blocks)
    F = 2 * N + 2  # feature ramps per block
    W = 2 * N      # work neurons per block

    feats, works = [], []  # per block: feature kinks; work weights over features
    for b, idx in enumerate(blocks):
        groups = [idx[s:s + N] for s in range(0, len(idx), N)]
        pieces = [[z[i] for i in g] for g in groups]
        lo = z[idx[0] - 1] if idx[0] > 0 else z[idx[0]] - 2
        after = z[idx[-1] + 1] if idx[-1] + 1 < M else z[idx[-1]] + 2
        kinks = _ramp_basis(lo, pieces, after)
        # pad to N groups so every block has exactly 2N + 2 kinks
        while len(kinks) < F:
            kinks.append(kinks[-1] + 1)
        feats.append(kinks)
        # per work neuron: list of per-group affine functions
        aff = [[(Fraction(0), Fraction(0))] * len(groups) for _ in range(W)]
        for g, grp in enumerate(groups):
            zetas, cs = _solve_group([z[i] for i in grp], [y[i] for i in grp])
            for k, (zeta, c) in enumerate(zip(zetas, cs)):
                row = 2 * k if c >= 0 else 2 * k + 1
                aff[row][g] = (abs(c), -abs(c) * zeta)
        wrows = []
        for row in aff:
            coef = _ramp_coefficients(kinks, row)
            coef += [Fraction(0)] * (F - len(coef))
            wrows.append(coef)
        works.append(wrows)

    layers = []
    # hidden layer 1: features of block 0, z carry
    e = {(i, 0): 1 for i in range(F + 1)}
    layers.append(AffineLayer(e, [-k for k in feats[0]] + [0], shape=(F + 1, 1)))
    prev_has_acc = False
    for b in range(B):
        # hidden layer b + 2 from layer b + 1 = [feat_b (F), (work_{b-1})?, z, acc?]
        # layout of layer b + 1 output: work_{b-1} (if b > 0), feat_b, z, acc (if b > 1)
        off_w = 0
        off_f = W if b > 0 else 0
        off_z = off_f + F
        off_acc = off_z + 1 if prev_has_acc else None
        n_prev = off_z + 1 + (1 if prev_has_acc else 0)
        e, bias = {}, []
        row = 0
        for wr in works[b]:
            for c, val in enumerate(wr):
                if val:
                    e[(row, off_f + c)] = val
            bias.append(0)
            row += 1
        last = b == B - 1
        if not last:
            for kink in feats[b + 1]:
                e[(row, off_z)] = 1
                bias.append(-kink)
                row += 1
            e[(row, off_z)] = 1
            bias.append(0)
            row += 1
        if b > 0:
            # acc += output of block b - 1
            for k in range(W):
                e[(row, off_w + k)] = 1 if k % 2 == 0 else -1
            if off_acc is not None:
                e[(row, off_acc)] = 1
            bias.append(0)
            row += 1
            prev_has_acc = True
        layers.append(AffineLayer(e, bias, shape=(row, n_prev)))
    # output layer: acc + block B-1
    n_prev = layers[-1].n_out
    e = {(0, k): (1 if k % 2 == 0 else -1) for k in range(W)}
    if B > 1:
        e[(0, n_prev - 1)] = 1
    layers.append(AffineLayer(e, [0], shape=(1, n_prev)))
    core = ReluNet(layers)
    pre = linear_net({(0, c): w[c] for c in range(d)}, [shift], shape=(1, d))
    return ReluNet(compose(pre, core).layers, name="fit_point_samples")


def fit_bit_samples(table: BitTable, N: int, L: int) -> ReluNet:
    """Network with ``net(x_i, k) = b_{i,k}`` for ``k = 1..L``.

    Rows are packed into ``Bin 0.b_1...b_L``, interpolated by
    :func:`fit_point_samples`, and decoded by ``select_bit(1, L)``.
    Width <= 4N+5, depth <= 5L+2.
    """
    if table.columns > L:
        raise CapacityError(f"{table.columns} bit columns exceed L = {L}")
    samples = SampleSet(table.points, table.packed(), dim=table.dim)
    fit = fit_point_samples(samples, N, L)
    first = stack([fit, passthrough(1, "nonneg", fit.depth)])
    return ReluNet(compose(first, select_bit(1, L)).layers, name="fit_bit_samples")
