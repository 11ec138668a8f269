"""
A network for the quadratic B-spline
====================================

The net is built from truncated powers with an approximate product block.
Its error is far below the certificate, and it is zero off the support.
"""

import numpy as np

from sinet.netcore import evaluate
from sinet.splines import bspline, bspline_net, bspline_net_bound

k = 3
x = np.linspace(-1, k + 2, 3001)
for N in (1, 2):
    net = bspline_net(k, 1, N, 1)
    err = np.abs(evaluate(net, x[:, None])[:, 0] - bspline(k, x)).max()
    print(f"N={N}: width={net.width} depth={net.depth} "
          f"error={err:.2e} certificate={float(bspline_net_bound(k, 1, N, 1)):.2e}")

# %%
# A crude text plot of the curve.
net = bspline_net(k, 1, 1, 1)
for t in np.linspace(0, k, 13):
    v = evaluate(net, np.array([[t]]))[0, 0]
    print(f"{t:5.2f} {'#' * int(round(40 * v))}")
