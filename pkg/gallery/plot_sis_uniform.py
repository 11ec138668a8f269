"""
Approximating a spline function on the whole cube
=================================================

A random piecewise linear function on a grid of mesh ``1/8`` is turned into a
network that is accurate away from the gaps, then three shifted copies are
combined with a middle-value block to cover the gaps too.
"""

from fractions import Fraction

import numpy as np

from sinet.harness import random_sis, sis_setup
from sinet.netcore import evaluate
from sinet.sis import build_q_net, build_uniform_net, eval_sis

g = random_sis(3, seed=2)
eps = Fraction(1, 64)
params, phi0, cert = sis_setup(g, eps, uniform=True)

q_net = build_q_net(g, params, phi0, cert)
u_net = build_uniform_net(g, params, phi0, cert)
print("Q net:", q_net)
print("uniform net:", u_net)

# %%
xs = np.linspace(0, 1, 4097)
want = np.array([float(eval_sis(g, Fraction(x))) for x in xs])
for name, net in (("Q net", q_net), ("uniform net", u_net)):
    err = np.abs(evaluate(net, xs[:, None])[:, 0] - want)
    print(f"{name:12s} max error {err.max():.3e}  (bound {float(6 * 2 * eps):.3e})")

# %%
# The Q net alone misbehaves near the dyadic points.
gap = np.abs(evaluate(q_net, xs[:, None])[:, 0] - want) > float(3 * 2 * eps)
print("points outside the Q bound:", xs[gap][:6], "...")
