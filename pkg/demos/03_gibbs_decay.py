"""
Decay of correlations under the Gibbs measure
=============================================

In the localized phase contacts decorrelate exponentially fast, and the
probability that the first renewal jumps all the way to n decays
exponentially in n.
"""

import warnings

import numpy as np

import pinlab
from pinlab import disorder as D
from pinlab import polymer as P
from pinlab import verification as V

law = pinlab.build_law(0.5)

###############################################################################
# One environment, covariances of X_a with X_b for growing b - a.  The
# double-double kernel resolves values far below the marginals.

omega = D.sample(D.IID(1.0), 512, seed=5)
ws = P.build_workspace(law, omega, 1.5)
lags = np.arange(2, 41, 6)
cov, ma, mb = P.covariance_profile(ws, 256, 256 + lags)
for d, c in zip(lags, cov):
    print(f"lag {d:2d}  Cov={c:+.3e}")

###############################################################################
# Replica average and exponential fit.

rep = V.check_gibbs_decay(law, D.ExpDecay(1.0, 0.5), 1.5, 512, 50, seed=1)
print(rep.notes, "r2", rep.rows[-2]["r2"], "passed", rep.passed)

###############################################################################
# Endpoint mass p(n) E[1/Z^-] against the rate mu.

with warnings.catch_warnings():
    warnings.simplefilter("ignore", pinlab.estimators.LowESSWarning)
    rep = V.check_endpoint_decay(law, D.IID(1.0), 2.0, [64, 128, 256, 512], 200, seed=2)
for row in rep.rows:
    print(row)
