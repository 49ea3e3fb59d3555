"""Progressive puncturing of a length-32 base code and what it does to a longer code.

Run: python demos/puncture_sequence.py
"""

import numpy as np

from rcpolar.construction import bec_bit_channels, good_set_fraction
from rcpolar.puncturing import Criterion, exhaustive_search, expand_regular, ppa_for_rate

order = ppa_for_rate(5, 11, Criterion.ga(3.5))
print("info set:", order.meta["info_set"])
print("puncture order:", order.order)
print("tied candidates per step:", [(m, len(c)) for m, c in order.tie_report(1e-12)])

# greedy bound against the exhaustive optimum for a few prefix sizes
info = [int(i) for i in order.meta["info_set"].split(",")]
for m in (1, 2, 3, 4):
    _, best = exhaustive_search(5, info, Criterion.ga(3.5), m)
    print(f"m={m}: PPA bound {order.bound_at(m):.4e}, optimum {best:.4e}")

# regular puncturing on longer mother codes: dead channels and the good set on BEC(0.5)
for n in (8, 10, 12):
    pat = expand_regular(order, 8, n)
    rel = bec_bit_channels(n, 0.5, pat)
    dead = int(np.sum(rel.capacity == 0))
    print(f"n={n}: punctured {len(pat)}, zero-capacity {dead}, good fraction {good_set_fraction(rel):.4f}")
