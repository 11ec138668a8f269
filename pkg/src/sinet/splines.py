"""Cardinal B-splines, their ReLU networks, and a quasi-interpolant onto ``S_j(N_k^d)``."""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from itertools import product

import numpy as np

from .gadgets import min2, product_approx, support_window
from .netcore import (
    AffineLayer,
    ReluNet,
    compose,
    linear_net,
    parallel,
    stack,
)
from .sis import Generator, SisFunction

__all__ = [
    "BsplineSpec",
    "bspline",
    "bspline_recurrence",
    "bspline_d",
    "bspline_generator",
    "bspline_net",
    "bspline_net_bound",
    "bspline_net_budget",
    "qi_weights",
    "quasi_interpolate",
    "fourier_bspline",
]


@dataclass(frozen=True)
class BsplineSpec:
    k: int
    d: int = 1

    def __post_init__(self):
        if self.k < 1:
            raise ValueError("order k must be >= 1")
        if self.d < 1:
            raise ValueError("dimension d must be >= 1")


def _is_array(x) -> bool:
    return isinstance(x, np.ndarray) and x.dtype != object


def bspline(k: int, x):
    """``N_k(x)`` from the truncated-power formula.

    Exact for Fraction/int input; numpy float arrays are handled elementwise.
    ``N_1`` is the indicator of ``[0, 1)``.
    """
    if k < 1:
        raise ValueError("order k must be >= 1")
    if _is_array(x):
        x = x.astype(float)
        if k == 1:
            return ((x >= 0) & (x < 1)).astype(float)
        out = np.zeros_like(x)
        inside = (x > 0) & (x < k)
        xi = x[inside]
        acc = np.zeros_like(xi)
        for l in range(k + 1):
            acc += (-1) ** l * math.comb(k, l) * np.maximum(xi - l, 0.0) ** (k - 1)
        out[inside] = acc / math.factorial(k - 1)
        return out
    if k == 1:
        return Fraction(1) if 0 <= x < 1 else Fraction(0)
    if x <= 0 or x >= k:
        return Fraction(0)
    total = 0
    for l in range(k + 1):
        t = x - l
        if t > 0:
            total += (-1) ** l * math.comb(k, l) * t ** (k - 1)
    return Fraction(total) / math.factorial(k - 1) if not isinstance(total, float) \
        else total / math.factorial(k - 1)


def bspline_recurrence(k: int, x):
    """``N_k`` from ``N_k(x) = (x N_{k-1}(x) + (k - x) N_{k-1}(x - 1)) / (k - 1)``."""
    if k < 1:
        raise ValueError("order k must be >= 1")
    if _is_array(x):
        x = x.astype(float)
        if k == 1:
            return ((x >= 0) & (x < 1)).astype(float)
        return (x * bspline_recurrence(k - 1, x) + (k - x) * bspline_recurrence(k - 1, x - 1)) / (k - 1)
    if k == 1:
        return Fraction(1) if 0 <= x < 1 else Fraction(0)
    return (x * bspline_recurrence(k - 1, x) + (k - x) * bspline_recurrence(k - 1, x - 1)) / (k - 1)


def bspline_d(k: int, d: int, x):
    """Tensor product ``prod_i N_k(x_i)``; ``x`` has length d (or shape (..., d))."""
    if _is_array(x):
        if x.shape[-1] != d:
            raise ValueError(f"last axis must have length {d}")
        out = np.ones(x.shape[:-1])
        for i in range(d):
            out = out * bspline(k, x[..., i])
        return out
    x = list(x) if np.ndim(x) else [x]
    if len(x) != d:
        raise ValueError(f"expected {d} coordinates")
    out = Fraction(1)
    for xi in x:
        out = out * bspline(k, xi)
        if out == 0:
            break
    return out


def bspline_generator(k: int, d: int = 1) -> Generator:
    """``N_k^d`` as a generator; its sup norm is ``N_k(k/2)^d``."""
    peak = bspline(k, Fraction(k, 2)) ** d

    def phi(x):
        return bspline_d(k, d, x)

    return Generator(phi, ((0, k),) * d, peak, f"bspline:k={k}")


# --------------------------------------------------------------------------
# networks


def _inner_net(k: int, N: int, L: int) -> ReluNet:
    """``x -> phi~_1(x)``, the truncated-power sum with each power from ``Phi_{k-1}``."""
    p = k - 1
    prod = product_approx(p, N, L)
    scale = Fraction(1, k + 1)
    # hidden layer: relu(x - l) for l = 0..k
    first = AffineLayer({(l, 0): 1 for l in range(k + 1)}, [-l for l in range(k + 1)], shape=(k + 1, 1))
    # feed each product block p copies of relu(x - l) / (k + 1)
    e = {}
    for l in range(k + 1):
        for c in range(p):
            e[(l * p + c, l)] = scale
    spread = AffineLayer(e, [0] * ((k + 1) * p), shape=((k + 1) * p, k + 1))
    head = ReluNet([first, spread])
    body = stack([prod] * (k + 1))
    coef = Fraction((k + 1) ** p, math.factorial(p))
    comb = [[coef * (-1) ** l * math.comb(k, l) for l in range(k + 1)]]
    return compose(compose(head, body), linear_net(comb))


def _clamped_net(k: int, N: int, L: int) -> ReluNet:
    """``phi_1 = min(relu(phi~_1), chi)``: values in [0, 1], zero off ``(0, k+1)``."""
    inner = _inner_net(k, N, L)
    relu = ReluNet([AffineLayer([[1]], [0]), AffineLayer([[1]], [0])])
    both = parallel([compose(inner, relu), support_window(k)], pad_sign="nonneg")
    return compose(both, min2())


def bspline_net(k: int, d: int, N: int, L: int) -> ReluNet:
    """ReLU network approximating ``N_k^d`` (``k >= 3``).

    Each coordinate goes through the clamped univariate net, and the d factors
    are multiplied with ``Phi_d``.  Every factor lies in [0, 1] and a zero factor
    gives an exact zero, so the net vanishes outside ``(0, k+1)^d``.
    """
    if k < 3:
        raise ValueError("the network construction needs k >= 3")
    if d < 1 or N < 1 or L < 1:
        raise ValueError("d, N, L must be >= 1")
    phi1 = _clamped_net(k, N, L)
    if d == 1:
        return ReluNet(phi1.layers, name=f"bspline{k}")
    net = compose(stack([phi1] * d), product_approx(d, N, L))
    return ReluNet(net.layers, name=f"bspline{k}^{d}")


def bspline_net_bound(k: int, d: int, N: int, L: int) -> Fraction:
    """Sup-error certificate for :func:`bspline_net`."""
    first = Fraction(9 * d * (2 * k + 2) ** k, math.factorial(k - 1)) / (N + 1) ** (7 * (k - 1) * L)
    second = Fraction(9 * (d - 1), (N + 1) ** (7 * d * L))
    return first + second


def bspline_net_budget(k: int, d: int, N: int, L: int) -> tuple[int, int]:
    return d * (k + 1) * (9 * (N + 1) + k), 7 * (k * k + d * d) * L


# --------------------------------------------------------------------------
# quasi-interpolation


def _solve(A, b):
    """Gaussian elimination over Fractions."""
    n = len(A)
    M = [list(map(Fraction, row)) + [Fraction(v)] for row, v in zip(A, b)]
    for c in range(n):
        piv = next(r for r in range(c, n) if M[r][c] != 0)
        M[c], M[piv] = M[piv], M[c]
        for r in range(n):
            if r != c and M[r][c] != 0:
                f = M[r][c] / M[c][c]
                M[r] = [a - f * p for a, p in zip(M[r], M[c])]
    return [M[i][n] / M[i][i] for i in range(n)]


def _poly_eval(coeffs, x):
    return sum(c * x ** i for i, c in enumerate(coeffs))


def _spline_sum(k: int, p, x: Fraction) -> Fraction:
    """``sum_n p(n) N_k(x - n)`` for a coefficient list ``p``."""
    lo = math.floor(x) - k + 1
    return sum(_poly_eval(p, Fraction(n)) * bspline(k, x - n) for n in range(lo, math.floor(x) + 1))


@lru_cache(maxsize=None)
def qi_weights(k: int) -> tuple:
    """Weights ``w_0..w_{k-1}`` for the nodes ``tau_i = i``.

    The synthesis map ``A p = sum_n p(n) N_k(. - n)`` preserves polynomials of
    degree < k.  A translation-invariant functional ``p -> sum_i w_i p(tau_i)``
    reproduces polynomials iff it agrees with ``(A^-1 p)(0)`` on monomials, which
    is a Vandermonde system in ``w``.
    """
    if k < 1:
        raise ValueError("order k must be >= 1")
    xs = [Fraction(2 * i + 1, 2) for i in range(k)]
    V = [[x ** m for m in range(k)] for x in xs]
    # columns of A in the monomial basis
    A = [[Fraction(0)] * k for _ in range(k)]
    for m in range(k):
        mono = [0] * m + [1]
        vals = [_spline_sum(k, mono, x) for x in xs]
        col = _solve(V, vals)
        for i in range(k):
            A[i][m] = col[i]
    rhs = []
    for m in range(k):
        e = [Fraction(int(i == m)) for i in range(k)]
        pre = _solve(A, e)  # coefficients of A^-1 x^m
        rhs.append(pre[0])
    T = [[Fraction(i) ** m for i in range(k)] for m in range(k)]
    return tuple(_solve(T, rhs))


def _pow2_above(v: Fraction) -> Fraction:
    M = Fraction(1)
    while M <= v:
        M *= 2
    while M / 2 > v and M > 1:
        M /= 2
    return M


def quasi_interpolate(f, j: int, spec: BsplineSpec, M=None) -> SisFunction:
    """Project ``f`` into ``S_j(N_k^d)`` with a polynomial-reproducing functional.

    ``c_n = sum_i w_i f(2^-j (n + tau))`` over the tensor nodes, for every ``n``
    whose spline meets ``[0,1]^d``.  ``f`` takes a list of d coordinates (a bare
    number when d = 1) and is called slightly outside the unit cube.  ``M``
    defaults to the smallest power of two above ``max |c_n|``.
    """
    k, d = spec.k, spec.d
    w = qi_weights(k)
    h = Fraction(1, 2 ** j)
    cache = {}

    def fv(idx):
        if idx not in cache:
            pt = [i * h for i in idx]
            cache[idx] = Fraction(f(pt[0] if d == 1 else pt))
        return cache[idx]

    coeffs = {}
    for n in product(range(-k + 1, 2 ** j), repeat=d):
        c = Fraction(0)
        for taus in product(range(k), repeat=d):
            wt = Fraction(1)
            for t in taus:
                wt *= w[t]
            c += wt * fv(tuple(ni + t for ni, t in zip(n, taus)))
        coeffs[n] = c
    big = max((abs(c) for c in coeffs.values()), default=Fraction(0))
    if M is None:
        M = _pow2_above(big)
    gen = bspline_generator(k, d) if k != 2 else _hat(d)
    return SisFunction(j, coeffs, M, gen, meta={"max_coeff": float(big)})


def _hat(d):
    from .sis import hat_generator

    return hat_generator(d)


def fourier_bspline(k: int, xi, deriv: int = 0, h: float = 1e-3) -> complex:
    """``N_k`` Fourier transform ``((1 - e^{-i xi}) / (i xi))^k`` or a central-difference derivative."""

    def ft(t):
        if t == 0:
            return 1.0 + 0j
        return ((1 - np.exp(-1j * t)) / (1j * t)) ** k

    if deriv == 0:
        return ft(xi)
    # central difference of order ``deriv``
    return sum((-1) ** i * math.comb(deriv, i) * ft(xi + (deriv / 2 - i) * h)
               for i in range(deriv + 1)) / h ** deriv
