"""
The largest excursion
=====================

In the localized phase the longest excursion away from the defect grows
like log n / mu(h).  Exact path samples from the Gibbs measure make this
easy to look at.
"""

import warnings

import numpy as np

import pinlab
from pinlab import disorder as D
from pinlab import polymer as P

law = pinlab.build_law(0.5)
h = 1.5

with warnings.catch_warnings():
    warnings.simplefilter("ignore", pinlab.estimators.LowESSWarning)
    mu = pinlab.mu_hat(law, D.IID(1.0), h, 512, 200, seed=7)
print(f"mu_hat={mu.point:.4f} +- {mu.std_error:.4f} (ESS {mu.diagnostics['ess']:.1f} of 200)")

###############################################################################
# A single environment and a single path.

omega = D.sample(D.IID(1.0), 4096, seed=1)
ws = P.build_workspace(law, omega, h, r_max=0, backward=False)
path = P.sample_path(ws, seed=2)
print(f"contacts {path.L_n}, largest gap {path.M_n}, log n / mu_hat = {np.log(4096) / mu.point:.2f}")

###############################################################################
# M_n / log n over environments and sizes.

for n in (256, 1024, 4096):
    vals = []
    for r in range(10):
        om = D.sample(D.IID(1.0), n, seed=100 + r)
        w = P.build_workspace(law, om, h, r_max=0, backward=False)
        _, M = P.sample_paths(w, 100, seed=r)
        vals.append(M / np.log(n))
    vals = np.concatenate(vals)
    print(f"n={n:5d}  median M_n/log n = {np.median(vals):.3f}   1/mu_hat = {1 / mu.point:.3f}")
