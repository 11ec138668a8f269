import math
from fractions import Fraction as F
from itertools import product

import numpy as np
import pytest

from sinet.netcore import evaluate
from sinet.sis import eval_sis
from sinet.splines import (
    BsplineSpec,
    bspline,
    bspline_d,
    bspline_generator,
    bspline_net,
    bspline_net_bound,
    bspline_net_budget,
    fourier_bspline,
    qi_weights,
    quasi_interpolate,
)


def test_spec_validation():
    with pytest.raises(ValueError):
        BsplineSpec(0)
    with pytest.raises(ValueError):
        BsplineSpec(2, 0)


def test_hat_peak_and_support():
    assert bspline(2, F(1)) == 1
    for k in (1, 2, 3, 4, 5):
        assert bspline(k, F(-1, 3)) == 0 and bspline(k, F(k)) == 0 and bspline(k, F(k + 2)) == 0


def test_first_order_half_open():
    assert bspline(1, F(0)) == 1 and bspline(1, F(1)) == 0


@pytest.mark.parametrize("k", [1, 2, 3, 4, 5, 6])
def test_two_oracles_agree(k):
    from sinet.splines import bspline_recurrence

    x = np.linspace(-1, k + 1, 2001)
    assert np.abs(bspline(k, x) - bspline_recurrence(k, x)).max() <= 1e-12
    for q in (F(1, 3), F(7, 5), F(k, 2)):
        assert bspline(k, q) == bspline_recurrence(k, q)


def test_sup_norm():
    x = np.linspace(0, 8, 80001)
    assert bspline(2, x).max() == 1
    for k in (3, 4, 5, 6):
        assert bspline(k, x).max() <= 1
    assert bspline_generator(3).sup_norm == F(3, 4)


def test_tensor_product():
    assert bspline_d(2, 2, [F(1), F(1)]) == 1
    assert bspline_d(3, 2, [F(1), F(4)]) == 0
    pts = np.array([[0.5, 1.5], [2.0, -1.0]])
    assert bspline_d(3, 2, pts).tolist() == [bspline(3, 0.5) * bspline(3, 1.5), 0.0]


@pytest.mark.parametrize("k, d", [(2, 1), (3, 1), (4, 2), (3, 2)])
def test_partition_of_unity(k, d):
    axis = np.linspace(0, 1, 11)
    for x in product(axis, repeat=d):
        total = 0.0
        for n in product(range(-k - 1, 3), repeat=d):
            total += bspline_d(k, d, np.array([xi - ni for xi, ni in zip(x, n)]))
        assert abs(total - 1) <= 1e-12


def test_net_requires_k3():
    with pytest.raises(ValueError):
        bspline_net(2, 1, 1, 1)


@pytest.mark.parametrize("k", [3, 4])
@pytest.mark.parametrize("d", [1, 2])
@pytest.mark.parametrize("N", [1, 2])
def test_net_bound_budget(k, d, N):
    net = bspline_net(k, d, N, 1)
    w, dp = bspline_net_budget(k, d, N, 1)
    assert net.width <= w and net.depth <= dp
    side = 2000 if d == 1 else 60
    axis = np.linspace(-1, k + 2, side)
    pts = np.array(list(product(axis, repeat=d)))
    y = evaluate(net, pts)[:, 0]
    assert np.abs(y - bspline_d(k, d, pts)).max() <= float(bspline_net_bound(k, d, N, 1))
    assert y.min() >= 0 and y.max() <= 1


def test_bound_instance():
    assert bspline_net_bound(3, 1, 1, 1) == F(9 * 8 ** 3, 2) / 2 ** 14


def test_net_vanishes_outside():
    net = bspline_net(3, 1, 1, 1)
    assert evaluate(net, np.array([F(-5)], dtype=object), "rational")[0] == 0
    net = bspline_net(4, 2, 1, 1)
    outside = [(F(-1, 3), F(2)), (F(5) + F(1, 7), F(1, 2)), (F(9), F(-9))]
    out = evaluate(net, np.array(outside, dtype=object), "rational")[:, 0]
    assert out.tolist() == [0, 0, 0]


def test_weights_hat():
    assert qi_weights(2) == (0, 1)
    assert qi_weights(1) == (1,)
    assert sum(qi_weights(4)) == 1


def test_constant_coefficients():
    g = quasi_interpolate(lambda x: 1, 3, BsplineSpec(3))
    assert set(g.coeffs.values()) == {1}


@pytest.mark.parametrize("k", [2, 3, 4])
def test_polynomial_reproduction(k):
    for deg in range(k):
        g = quasi_interpolate(lambda x: x ** deg, 3, BsplineSpec(k))
        for i in range(16, 49):
            x = F(i, 64)
            assert abs(float(eval_sis(g, x) - x ** deg)) <= 1e-10


def test_polynomial_reproduction_2d():
    g = quasi_interpolate(lambda p: p[0] * p[1] ** 2, 2, BsplineSpec(3, 2))
    for a, b in product(range(4, 13), repeat=2):
        x = (F(a, 16), F(b, 16))
        assert eval_sis(g, x) == x[0] * x[1] ** 2


def test_zero_function_bound():
    g = quasi_interpolate(lambda x: 0, 3, BsplineSpec(3))
    assert g.M == 1 and not g.coeffs


def test_sin_rate():
    errs = []
    for j in (4, 5, 6, 7):
        g = quasi_interpolate(lambda x: math.sin(2 * math.pi * x), j, BsplineSpec(3))
        xs = np.linspace(0.25, 0.75, 513)
        errs.append(max(abs(float(eval_sis(g, F(x))) - math.sin(2 * math.pi * x)) for x in xs))
    steps = np.diff(np.log2(errs))
    assert all(abs(s + 3) <= 0.5 for s in steps[1:])


@pytest.mark.parametrize("k", [2, 3, 4])
def test_strang_fix_sanity(k):
    for n in (1, 2, 3):
        for order in range(min(k, 3)):
            assert abs(fourier_bspline(k, 2 * math.pi * n, order)) <= 1e-4
    assert abs(fourier_bspline(k, 0) - 1) <= 1e-15
