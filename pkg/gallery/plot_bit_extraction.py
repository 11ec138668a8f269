"""
Reading binary digits with a ReLU net
=====================================

A fixed-size network peels off the leading bits of ``x`` exactly, as long as
``x`` stays out of the thin slabs just left of each dyadic point.
"""

from fractions import Fraction

import numpy as np

from sinet.bits import QDomain, bits_of, extract_bits
from sinet.netcore import evaluate

j, r = 6, 3
delta = Fraction(1, 2 ** (j + 2))
net = extract_bits(j, delta, r)
print(net)

# %%
# Evaluate in exact arithmetic on a dyadic grid of the kept set.
xs = QDomain(j, delta).grid_1d(10)
out = evaluate(net, np.array([[x] for x in xs], dtype=object), "rational")
wrong = sum(list(row[:r]) != bits_of(x, r) for row, x in zip(out, xs))
print(f"{len(xs)} points, {wrong} wrong bit patterns")

# %%
# Inside a gap the output is some continuous blend, not a bit.
x = Fraction(1, 2) - delta / 2
print("in a gap:", evaluate(net, np.array([[x]], dtype=object), "rational")[0])
