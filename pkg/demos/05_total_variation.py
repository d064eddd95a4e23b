"""Total variation between two ensembles.

On a single Ornstein-Uhlenbeck mode the exact distance is known, so the
histogram estimate can be checked against it.  A projection can only lose
distance, so the estimate is a lower bound up to sampling bias.
"""
# %%
import math

import numpy as np

from rdergodic.ergolab import fit_tv_decay, gaussian_tv, tv_lower
from rdergodic.model import CovarianceSpec, DriftPolynomial, ModelSpec
from rdergodic.sim import SimParams, run_ensemble

# alpha = 1, lambda = 2: stationary variance 1.  The model is linear, so any step is exact.
spec = ModelSpec(n_modes=1, drift=DriftPolynomial.zero(),
                 covariance=CovarianceSpec.power_law(2.0, 0.0))
times = tuple(float(t) for t in np.arange(1, 17) * 0.25)
ens = run_ensemble([[2.0], [0.0]], 10_000, spec,
                   SimParams(dt=0.25, t_end=4.0, record_times=times, seed=3))
curve = tv_lower(ens.group(0), ens.group(1), projection=1, bins=64)

# %%
for t, v, e in zip(curve.times, curve.values, curve.errors):
    exact = gaussian_tv(2 * math.exp(-t), 0.0, math.sqrt(-math.expm1(-2 * t)))
    print(f"t={t:4.2f}  estimate={v:.3f} +- {e:.3f}  exact={exact:.3f}")

# %% The decay rate of the signal-dominated part should be close to 1
print(fit_tv_decay(curve, t_min=0.5, snr=1.5))
