"""
Free energy of the pinned polymer
=================================

Start with the homogeneous model, where the free energy solves a single
equation, then switch on disorder and watch the quenched curve fall below
the annealed one.
"""

import numpy as np

import pinlab
from pinlab import disorder as D
from pinlab import polymer as P

# inter-arrival law p(t) ~ t^(-3/2), normalized over a horizon of 10^7
law = pinlab.build_law(0.5)
print("normalization constant", law.norm_constant, "tail mass", law.tail_mass)

# pure model: F(h) solves sum_t p(t) exp(-F t) = exp(-h)
n = 4096
for h in (0.5, 1.0, 2.0):
    ws = P.build_workspace(law, np.zeros(n), h, r_max=0, backward=False)
    print(f"h={h:3.1f}  F(h)={pinlab.pure_free_energy(law, h):.5f}  (1/n) log Z_n={P.log_partition(ws) / n:.5f}")

###############################################################################
# Quenched free energy with IID Gaussian charges.  Replicas share their
# environments across h, so the curve is monotone replica by replica.

hs = [0.0, 0.5, 1.0, 1.5, 2.0]
recs = pinlab.estimators.free_energy_curve(law, D.IID(1.0), hs, 1024, 20, seed=1)
for r in recs:
    annealed = pinlab.pure_free_energy(law, r.h + 0.5)
    print(f"h={r.h:3.1f}  f_hat={r.point:.4f} +- {r.std_error:.4f}   annealed={annealed:.4f}")

###############################################################################
# Contact density and its fluctuations come straight out of the moment
# recursion, no finite differences needed.

omega = D.sample(D.ExpDecay(1.0, 0.5), 2048, seed=3)
ws = P.build_workspace(law, omega, 1.5, r_max=4)
mean, var, k3, k4 = P.contact_cumulants(ws, 4)
print(f"E[L_n]/n={mean / 2048:.4f}  Var/n={var / 2048:.4f}  k3/n={k3 / 2048:.4f}  k4/n={k4 / 2048:.4f}")
