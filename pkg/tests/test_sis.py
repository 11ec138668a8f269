import itertools
import json
import random
from fractions import Fraction as F

import numpy as np
import pytest

from sinet.bits import QDomain
from sinet.netcore import evaluate
from sinet.sis import (
    ApproxParams,
    Generator,
    SisFunction,
    build_q_net,
    build_term_net,
    build_uniform_net,
    coeff_bits,
    eval_sis,
    generator_from_name,
    hat_generator,
    hat_net,
    localize,
    m_r_split,
    q_index,
    q_net_budget,
    rate_compose,
    register_generator,
    split_points,
    term_net_budget,
    uniform_net_budget,
)


def rand_g(j, d=1, seed=0, den=3 ** 9):
    rng = random.Random(seed)
    coeffs = {n: F(rng.randint(-den + 1, den - 1), den) for n in itertools.product(range(-1, 2 ** j), repeat=d)}
    return SisFunction(j, coeffs, 1, hat_generator(d))


def test_hat_generator_shift_set():
    g = hat_generator(1)
    assert g.shift_set == ((-1,), (0,)) and g.C == 2
    assert hat_generator(2).C == 4
    assert g([F(1, 2)]) == F(1, 2) and g([F(3)]) == 0


def test_shifted_generator():
    g = hat_generator(1).shifted([F(1, 4)])
    assert g([F(3, 4)]) == 1
    assert g.C == 3
    assert hat_generator(1).shifted([F(-1, 4)]).C == 3


def test_generator_validation():
    with pytest.raises(ValueError):
        Generator(lambda x: 0, ((1, 1),), 1)
    with pytest.raises(ValueError):
        Generator(lambda x: 0, ((0, 1),), 0)


def test_single_coefficient():
    j = 3
    g = SisFunction(j, {(0,): 1}, 2, hat_generator(1))
    assert eval_sis(g, F(1, 2 ** (j + 1))) == F(1, 2)


def test_zero_function():
    g = SisFunction(2, {}, 1, hat_generator(2))
    assert eval_sis(g, (F(1, 3), F(2, 3))) == 0


def test_coefficient_bound_strict():
    with pytest.raises(ValueError):
        SisFunction(2, {0: 1}, 1, hat_generator(1))
    with pytest.raises(ValueError):
        SisFunction(2, {(0, 0): F(1, 2)}, 1, hat_generator(1))


def test_m_r_split():
    assert m_r_split([F(13, 16)], 2) == ((3,), (F(1, 4),))
    assert m_r_split([0], 5) == ((0,), (0,))
    assert m_r_split([F(1, 2), F(1, 4)], 1) == ((1, 0), (0, F(1, 2)))
    with pytest.raises(ValueError):
        m_r_split([F(1)], 2)


def test_localize_matches_direct_sum():
    rng = random.Random(0)
    for d, j in ((1, 3), (2, 3)):
        g = rand_g(j, d, seed=d)
        for _ in range(300):
            x = [F(rng.randrange(2 ** 20), 2 ** 20) for _ in range(d)]
            assert localize(g, x) == eval_sis(g, x)


def test_localize_on_cell_boundaries():
    g = rand_g(3, 1, seed=4)
    for k in range(8):
        assert localize(g, [F(k, 8)]) == eval_sis(g, F(k, 8))


def test_single_term_localized():
    gen = Generator(lambda x: max(F(0), 1 - abs(2 * x[0] - 1)), ((0, 1),), 1, "unit-hat")
    assert gen.C == 1
    g = SisFunction(2, {(1,): F(1, 2)}, 1, gen)
    assert localize(g, [F(3, 8)]) == eval_sis(g, F(3, 8)) == F(1, 2)


def test_json_roundtrip():
    g = SisFunction(3, {(0,): F(1, 2), (3,): F(-1, 4)}, 1, hat_generator(1))
    h = SisFunction.from_json(g.to_json())
    assert h.coeffs == g.coeffs and h.M == g.M and h.generator.name == "bspline:k=2"
    doc = json.loads(g.to_json())
    assert doc["coeffs"][0] == {"n": [0], "c": 0.5}


def test_json_errors():
    with pytest.raises(ValueError):
        SisFunction.from_json('{"j": 1}')
    with pytest.raises(ValueError):
        SisFunction.from_json('{"j":1,"d":1,"M":1,"generator":"nope","coeffs":[]}')


def test_registry():
    register_generator("unit-hat", lambda d: hat_generator(d))
    assert generator_from_name("unit-hat", 2).d == 2
    assert generator_from_name("bspline:k=3", 1).C == 3


def test_coeff_bits():
    g = SisFunction(2, {(0,): 0, (1,): F(-7, 8)}, 1, hat_generator(1))
    t = coeff_bits(g, 6)
    assert t.bits[0] == (1, 0, 0, 0, 0, 0)
    assert t.bits[1] == (0, 0, 0, 1, 0, 0)
    g = rand_g(3, seed=9)
    for m, row in zip(coeff_bits(g, 10).points, coeff_bits(g, 10).bits):
        rec = sum(F(b, 2 ** i) for i, b in enumerate(row)) - 1
        assert abs(rec - g.coeff(m)) <= F(2, 2 ** 10)


def test_q_index():
    assert q_index([[0, 0], [0]], (1, 2), 3) == 1
    assert q_index([[1, 1], [1]], (1, 2), 3) == 2 ** 3
    for s in (1, 4, 8, 12):
        split = split_points(6, 2, s)
        lows = [6 - k for k in split]
        seen = set()
        for pattern in itertools.product((0, 1), repeat=s):
            parts, at = [], 0
            for w in lows:
                parts.append(list(pattern[at:at + w]))
                at += w
            seen.add(q_index(parts, split, 6))
        assert seen == set(range(1, 2 ** s + 1))
    with pytest.raises(ValueError):
        q_index([[0], [0]], (1, 2), 3)


def test_split_points():
    assert split_points(4, 2, 3) == (2, 3)
    assert split_points(4, 3, 0) == (4, 4, 4)
    assert sum(4 - k for k in split_points(4, 2, 20)) == 8


def test_params_validation():
    with pytest.raises(ValueError):
        ApproxParams(1, 1, 2, 2, F(1, 16), F(1, 64))  # 4 bits < 5
    p = ApproxParams(1, 1, 5, 1, F(1, 16), F(1, 64))
    with pytest.raises(ValueError):
        p.check(6, 1)
    with pytest.raises(ValueError):
        ApproxParams(2, 2, 5, 1, F(1, 16), F(1, 8)).check(3, 1)
    with pytest.raises(ValueError):
        ApproxParams(2, 2, 5, 1, F(1, 16), F(1, 20)).check(3, 1, uniform=True)


def setup(j, e, d=1):
    eps = F(1, 2 ** e)
    params = ApproxParams(max(1, (d * j + 1) // 2 - 1), 1, e + 1, 1, eps, F(1, 2 ** (j + 2)))
    phi0, err = hat_net(d, 2, 1)
    return params, phi0, err


def q_grid_error(net, g, params, level, mode="float"):
    pts = QDomain(g.j, params.delta, g.d).grid(level)
    if mode == "float":
        y = evaluate(net, pts.astype(float), mode)[:, 0]
        return max(abs(float(v) - float(eval_sis(g, list(p)))) for v, p in zip(y, pts))
    y = evaluate(net, pts, mode)[:, 0]
    return max(abs(v - eval_sis(g, list(p))) for v, p in zip(y, pts))


def test_term_net_bound_and_budget():
    g = rand_g(3, seed=1)
    params = ApproxParams(2, 2, 4, 4, F(1, 16), F(1, 32))
    phi0, err = hat_net(1)
    for k in g.generator.shift_set:
        net = build_term_net(g, k, params, phi0, err)
        w, dp = term_net_budget(g, params, phi0)
        assert net.width <= w and net.depth <= dp
        pts = QDomain(3, params.delta).grid(9)
        y = evaluate(net, pts.astype(float))[:, 0]
        for v, (x,) in zip(y, pts):
            m, r = m_r_split([x], 3)
            want = g.coeff((m[0] + k[0],)) * g.generator([r[0] - k[0]])
            assert abs(v - float(want)) <= 3 / 16


def test_term_net_zero_function():
    g = SisFunction(3, {}, 1, hat_generator(1))
    params = ApproxParams(2, 2, 4, 4, F(1, 16), F(1, 32))
    phi0, err = hat_net(1)
    net = build_term_net(g, (0,), params, phi0, err)
    y = evaluate(net, QDomain(3, params.delta).grid(8).astype(float))[:, 0]
    assert np.abs(y).max() <= 3 / 16


def test_certificate_required():
    g = rand_g(2)
    params = ApproxParams(1, 1, 5, 1, F(1, 16), F(1, 16))
    phi0, _ = hat_net(1)
    with pytest.raises(ValueError):
        build_q_net(g, params, phi0, None)
    with pytest.raises(ValueError):
        build_q_net(g, params, phi0, F(1, 4))


@pytest.mark.parametrize("j", [2, 3])
def test_q_net_exact_for_dyadic_coefficients(j):
    g = rand_g(j, seed=j, den=2 ** 4)
    params, phi0, err = setup(j, 4)
    net = build_q_net(g, params, phi0, err)
    assert q_grid_error(net, g, params, j + 4, "rational") == 0


@pytest.mark.parametrize("d, j, e", [(1, 3, 4), (1, 4, 6), (2, 2, 4)])
def test_q_net_bound_and_budget(d, j, e):
    g = rand_g(j, d, seed=d + j)
    params, phi0, err = setup(j, e, d)
    net = build_q_net(g, params, phi0, err)
    w, dp = q_net_budget(g, params, phi0)
    assert net.width <= w and net.depth <= dp
    assert q_grid_error(net, g, params, j + (5 if d == 1 else 2)) <= 3 * g.generator.C * 2.0 ** -e


def test_q_net_width_formula_d1():
    g = rand_g(3)
    params, phi0, err = setup(3, 4)
    w, _ = q_net_budget(g, params, phi0)
    assert w == 2 * (max(7 * params.r_tilde * 2 ** params.r, phi0.width) + 4)


@pytest.mark.parametrize("d, j, e", [(1, 3, 4), (1, 4, 6), (2, 2, 4)])
def test_uniform_net(d, j, e):
    g = rand_g(j, d, seed=3 * d + j)
    params, phi0, err = setup(j, e, d)
    q = build_q_net(g, params, phi0, err)
    net = build_uniform_net(g, params, phi0, err)
    assert net.depth == q.depth + 2 * d
    w, dp = uniform_net_budget(g, params, phi0)
    assert net.width <= w and net.depth <= dp
    n = 2001 if d == 1 else 65
    axis = np.linspace(0, 1, n)
    pts = np.array(list(itertools.product(axis, repeat=d)))
    y = evaluate(net, pts)[:, 0]
    err_ = max(abs(v - float(eval_sis(g, [F(c) for c in p]))) for v, p in zip(y, pts))
    assert err_ <= 6 * g.generator.C * 2.0 ** -e


def test_uniform_rejects_large_delta():
    g = rand_g(3)
    params = ApproxParams(2, 1, 5, 1, F(1, 16), F(1, 20))
    phi0, err = hat_net(1)
    with pytest.raises(ValueError):
        build_uniform_net(g, params, phi0, err)


def test_rate_compose_branches():
    a, b, d, N, L = 3.0, 1.0, 1, 8.0, 4.0
    assert rate_compose(a, b, d, N, L) == pytest.approx((N * L / (3 * 2)) ** -2)
    assert rate_compose(1.0, 2.0, 1, N, L) == pytest.approx((N * L) ** -1.0)
    assert rate_compose(2.0, 1.0, 1, 16, 16) == (256 / 16) ** -2
    assert rate_compose(0.2 + 0.1, 0.15, 1, 4, 4) == (16 / 4) ** -0.3
    with pytest.raises(ValueError):
        rate_compose(1, 1, 1, 1, 4)
