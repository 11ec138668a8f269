"""
Convergence for a smooth target
===============================

Quasi-interpolation onto quadratic splines followed by the network
construction. The sup error should drop by about ``2^-3`` per level.
"""

import math

from sinet.harness import rate_experiment
from sinet.splines import BsplineSpec


def target(x):
    return math.sin(2 * math.pi * float(x))


fit = rate_experiment(target, BsplineSpec(3), [4, 5, 6, 7], resolution=10)
for j, e, (w, d) in zip(fit.levels, fit.errors, fit.sizes):
    print(f"j={j}  error={e:.3e}  width={w}  depth={d}")
print(f"slope {fit.slope:.2f} (expected {fit.slope_expected:.0f})")
