"""Chase combining vs incremental redundancy on a short 16-QAM link.

A reduced version of the acceptance run (N=256 instead of 1024, 200
sessions per point) so that it finishes in well under a minute.

Run: python demos/harq_throughput.py
"""

import numpy as np

from rcpolar.sim import SimConfig, run_harq_sweep

cfg = SimConfig(n=8, k=88, p=5, L=96, modulation=16, snr_db=tuple(np.arange(0.0, 16.1, 2.0)),
                t=4, sessions=200, chunk=100, seed=1)
res = {s: run_harq_sweep(cfg, scheme=s) for s in ("cc", "ir")}

print(f"rate {cfg.code_rate:.3f}, peak throughput {cfg.code_rate * 4:.3f}")
print(" snr    T_cc   T_ir   t_cc  t_ir")
for cc, ir in zip(res["cc"], res["ir"]):
    print(f"{cc.snr_db:4.0f}  {cc.throughput:6.3f} {ir.throughput:6.3f}  {cc.counts.t_bar:4.2f}  {ir.counts.t_bar:4.2f}")
