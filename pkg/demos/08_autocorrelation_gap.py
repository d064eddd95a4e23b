"""A second rate estimate from one long stationary path.

The autocorrelation of the first coefficient decays roughly like
exp(-gamma t).  Reading gamma as a spectral gap presumes reversible dynamics,
which the estimate records rather than checks.
"""
# %%
import numpy as np

from rdergodic.ergolab import stationary_gap
from rdergodic.model import ModelSpec
from rdergodic.sim import SimParams, simulate_trajectory

spec = ModelSpec(n_modes=16)
times = tuple(float(t) for t in np.arange(1, 1601) * 0.05)
path = simulate_trajectory(spec.zero_field(), spec,
                           SimParams(t_end=times[-1], record_times=times, seed=4))
est = stationary_gap(path, 1, burn_in=5.0)
print("gamma from autocorrelation:", round(est.gamma_rate, 3), "r2", round(est.fit.r2, 4))
print("first autocorrelations:", np.round(est.acf[:8], 3))
