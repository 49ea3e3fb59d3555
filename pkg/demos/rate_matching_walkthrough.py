"""Circular buffer and BICM column labels for one N=1024 codeword.

Run: python demos/rate_matching_walkthrough.py
"""

import numpy as np

from rcpolar.bicm import PUNCTURED, assign_columns, harq_shift
from rcpolar.puncturing import Criterion, expand_regular, ppa_for_rate
from rcpolar.rate_match import RateMatchConfig, derate_match, repetition_counts

order = ppa_for_rate(5, 11, Criterion.ga(3.5))
N = 1024

for L in (640, 1024, 1031, 2100):
    cfg = RateMatchConfig(5, 5, L, order)
    reps = repetition_counts(cfg)
    print(f"L={L:5d}: never sent {np.sum(reps == 0):4d}, sent twice or more {np.sum(reps >= 2):4d}")

# reading 640 bits from column 0 leaves out the regular pattern of the first 12 entries
cfg = RateMatchConfig(5, 5, 640, order)
holes = set(np.flatnonzero(derate_match(np.ones(640), cfg) == 0).tolist())
print("holes == regular pattern for m=12:", holes == expand_regular(order, 12, 10))

# 16-QAM labels per column: 0 is the reliable bit level, -1 is not transmitted
a = assign_columns(640, cfg, 16)
row = [segs[0][2] if len(segs) == 1 else "/".join(str(s[2]) for s in segs)
       for _, segs in sorted(a.column_labels().items())]
print("round 1 column labels:", row)
b = harq_shift(a, 2, 4, 5)
print("round 2 starts at column", b.start_column, "first segment", b.segments[0])
print("padding slots in the symbol map:", int(np.sum(a.symbol_slots == PUNCTURED)))
