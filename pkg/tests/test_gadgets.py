from fractions import Fraction as F
from itertools import product

import numpy as np
import pytest

from sinet.gadgets import (
    IndicatorSpec,
    binary_gate,
    clamp01,
    max2,
    max3,
    mid3,
    min2,
    min3,
    minmax2,
    mul_approx,
    product_approx,
    product_levels,
    soft_indicator,
    square_approx,
    support_window,
    teeth,
    teeth_value,
)
from sinet.netcore import evaluate


def ev(net, *x):
    return evaluate(net, np.array(x, dtype=object), "rational")


def evf(net, x):
    return evaluate(net, np.asarray(x, dtype=float))


DELTA = F(1, 64)
IND = IndicatorSpec(F(1, 4), F(1, 2), DELTA)


@pytest.mark.parametrize("x, want", [(F(3, 10), 1), (F(1, 4) - DELTA, 0), (F(1, 4) - DELTA / 2, F(1, 2)),
                                     (F(1, 2), 1), (F(1, 2) + DELTA, 0), (F(-3), 0), (F(5), 0)])
def test_soft_indicator_values(x, want):
    assert ev(soft_indicator(IND), x)[0] == want


def test_soft_indicator_size_and_range():
    net = soft_indicator(IND)
    assert (net.width, net.depth) == (2, 3)
    y = evf(net, np.linspace(-2, 2, 4001)[:, None])
    assert y.min() >= 0 and y.max() <= 1


def test_indicator_spec_validation():
    with pytest.raises(ValueError):
        IndicatorSpec(1, 0, 0.1)
    with pytest.raises(ValueError):
        IndicatorSpec(0, 1, 0)


def test_binary_gate_examples():
    g = binary_gate()
    assert ev(g, 0, F(17, 10))[0] == 0
    assert ev(g, 1, -2)[0] == -2
    assert ev(g, 1, F(3, 10))[0] == F(3, 10)
    assert (g.width, g.depth) == (2, 2)


def test_binary_gate_sweep():
    b = np.arange(-2000, 2001) / 1000
    g = binary_gate()
    for a in (0.0, 1.0):
        y = evf(g, np.column_stack([np.full_like(b, a), b]))[:, 0]
        assert np.abs(y - a * b).max() <= 1e-15


def test_max_min_exact(rng):
    d = rng.integers(-2 ** 20, 2 ** 20, size=(1000, 2)) / 1024
    assert np.array_equal(evf(max2(), d)[:, 0], d.max(1))
    assert np.array_equal(evf(min2(), d)[:, 0], d.min(1))
    x = rng.normal(size=(1000, 2)) * 10
    assert np.allclose(evf(max2(), x)[:, 0], x.max(1), atol=1e-14)
    assert np.allclose(evf(min2(), x)[:, 0], x.min(1), atol=1e-14)
    mm = evf(minmax2(), x)
    assert np.allclose(mm[:, 0], x.max(1), atol=1e-14) and np.allclose(mm[:, 1], x.min(1), atol=1e-14)


def test_three_way(rng):
    x = rng.integers(-50, 50, size=(500, 3)).astype(float)
    assert np.array_equal(evf(max3(), x)[:, 0], x.max(1))
    assert np.array_equal(evf(min3(), x)[:, 0], x.min(1))


@pytest.mark.parametrize("trip, want", [((1, 2, 3), 2), ((5, 5, 0), 5), ((3, -1, 3), 3), ((0, 0, 0), 0)])
def test_mid3_examples(trip, want):
    assert ev(mid3(), *trip)[0] == want


def test_mid3_sort_oracle(rng):
    x = rng.integers(-2 ** 20, 2 ** 20, size=(1000, 3)) / 1024
    x[:100, 2] = x[:100, 0]
    assert np.array_equal(evf(mid3(), x)[:, 0], np.sort(x, 1)[:, 1])


def test_mid3_size():
    net = mid3()
    assert net.width <= 14 and net.depth == 3


def test_mid_lift_property(rng):
    # two of three inside [y - e, y + e] forces the middle value inside too
    for _ in range(200):
        y, e = rng.normal(), abs(rng.normal())
        good = y + rng.uniform(-e, e, size=2)
        bad = rng.normal() * 100
        trip = rng.permutation([good[0], good[1], bad])
        m = evf(mid3(), trip)[0]
        assert y - e - 1e-12 <= m <= y + e + 1e-12


def test_teeth_values():
    assert ev(teeth(1), F(1, 2))[0] == 1
    assert ev(teeth(2), F(1, 4))[0] == 1
    assert ev(teeth(2), F(1, 2))[0] == 0
    assert ev(teeth(3), F(5, 8))[0] == 1


@pytest.mark.parametrize("i", [1, 2, 3, 4, 5])
def test_teeth_dyadic_parity(i):
    net = teeth(i)
    xs = np.array([[F(k, 2 ** i)] for k in range(2 ** i + 1)], dtype=object)
    assert evaluate(net, xs, "rational")[:, 0].tolist() == [k % 2 for k in range(2 ** i + 1)]
    x = F(3, 7)
    assert ev(net, x)[0] == teeth_value(i, x)


def test_square_examples():
    assert ev(square_approx(1), F(1, 2))[0] == F(1, 4)
    assert ev(square_approx(3), 0)[0] == 0


@pytest.mark.parametrize("s", [1, 2, 3, 4, 5, 6])
def test_square_bound_and_exact_grid(s):
    net = square_approx(s)
    x = np.linspace(0, 1, 10001)
    err = np.abs(evf(net, x[:, None])[:, 0] - x ** 2).max()
    assert err <= 2.0 ** (-2 * s - 2) + 1e-12
    grid = np.array([[F(k, 2 ** s)] for k in range(2 ** s + 1)], dtype=object)
    assert (evaluate(net, grid, "rational")[:, 0] == grid[:, 0] ** 2).all()


@pytest.mark.parametrize("mu", [1, 2, 3])
def test_square_levels_per_layer_agree(mu):
    s = 6
    x = np.array([[F(k, 3 ** 5)] for k in range(0, 3 ** 5 + 1, 7)], dtype=object)
    a = evaluate(square_approx(s, 1), x, "rational")
    b = evaluate(square_approx(s, mu), x, "rational")
    assert (a == b).all()
    assert square_approx(s, mu).depth == s // mu + 1


def test_mul_approx(rng):
    s = 4
    net = mul_approx(s)
    xy = rng.uniform(0, 1, size=(2000, 2))
    err = np.abs(evf(net, xy)[:, 0] - xy.prod(1)).max()
    assert err <= 6 * 2.0 ** (-2 * s - 2)
    assert ev(mul_approx(2), F(1, 2), F(1, 2))[0] == F(1, 4)
    assert abs(ev(net, 0, F(5, 7))[0]) <= 6 * F(1, 2 ** (2 * s + 2))


def test_mul_approx_range():
    s, a = 5, 4
    net = mul_approx(s, a)
    xy = np.array([[F(7, 3), F(10, 3)], [F(1, 5), F(39, 10)]], dtype=object)
    err = max(abs(v - p * q) for v, (p, q) in zip(evaluate(net, xy, "rational")[:, 0], xy))
    assert err <= 6 * a * a * F(1, 2 ** (2 * s + 2))


def test_clamp():
    y = evf(clamp01(), np.array([[-1.0], [0.3], [2.0]]))[:, 0]
    assert y.tolist() == [0.0, 0.3, 1.0]


def test_support_window():
    k = 3
    chi = support_window(k)
    assert ev(chi, F(k, 2))[0] == 1
    assert ev(chi, F(-3, 2))[0] == 0
    assert ev(chi, F(-1, 2))[0] == F(1, 2)
    assert ev(chi, k + F(1, 2))[0] == F(1, 2)
    assert ev(chi, k + 2)[0] == 0


def test_product_levels():
    s, mu = product_levels(2, 1, 1)
    assert s % mu == 0
    assert F(1, 4 ** s) <= 9 * F(1, 2 ** 14)


def nondyadic_grid(k, n):
    return [tuple(F(i, n) for i in idx) for idx in product(range(n + 1), repeat=k)]


@pytest.mark.parametrize("k, N, L", [(2, 1, 1), (2, 2, 1), (3, 1, 1), (3, 1, 2), (4, 1, 1), (4, 2, 1)])
def test_product_bound_and_budget(k, N, L):
    net = product_approx(k, N, L)
    assert net.width <= 9 * N + k + 7 and net.depth <= 7 * k * (k - 1) * L
    bound = 9 * (k - 1) * F(1, (N + 1) ** (7 * k * L))
    pts = nondyadic_grid(k, {2: 27, 3: 9, 4: 5}[k])
    out = evaluate(net, np.array(pts, dtype=object), "rational")[:, 0]
    err = max(abs(v - np.prod(p)) for v, p in zip(out, pts))
    assert err <= bound


def test_product_zero_absorption():
    assert ev(product_approx(3, 1, 1), F(1, 2), 0, F(9, 10))[0] == 0
    net = product_approx(4, 2, 1)
    for pos in range(4):
        x = [F(1, 3), F(5, 7), F(2, 9), F(1)]
        x[pos] = 0
        assert ev(net, *x)[0] == 0


def test_product_ones():
    N, L = 1, 1
    v = ev(product_approx(4, N, L), 1, 1, 1, 1)[0]
    assert abs(v - 1) <= 27 * F(1, (N + 1) ** (28 * L))


def test_product_argument_checks():
    with pytest.raises(ValueError):
        product_approx(1, 1, 1)
    with pytest.raises(ValueError):
        product_approx(2, 0, 1)
