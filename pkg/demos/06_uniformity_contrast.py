"""Forgetting the initial condition: cubic drift against no drift.

With f = -u^3 the time for the distance to a reference ensemble to fall below
0.25 hardly depends on how far away the path started.  Without drift the mean
decays only exponentially, so the time grows like the log of the magnitude.
"""
# %%
import numpy as np

from rdergodic.ergolab import uniformity_sweep
from rdergodic.model import DriftPolynomial, ModelSpec
from rdergodic.sim import SimParams

mags = (10, 100, 1000)


def show(label, sweep):
    times = ["censored" if t is None else round(t, 3) for t in sweep.times]
    print(f"{label} times: {times}  spread {sweep.spread():.2f}")


# %% Cubic drift (smaller ensembles than the acceptance run)
rt = tuple(float(t) for t in np.arange(1, 41) * 0.05)
cubic = uniformity_sweep(ModelSpec(n_modes=16), mags, 0.25,
                         SimParams(t_end=2.0, record_times=rt, seed=5), n_traj=300)
show("cubic", cubic)

# %% Heat equation: linear, so coarse steps are exact
rt = tuple(float(t) for t in np.arange(1, 101) * 0.1)
heat = uniformity_sweep(ModelSpec(n_modes=16, drift=DriftPolynomial.zero()), mags, 0.25,
                        SimParams(dt=0.1, t_end=10.0, record_times=rt, seed=5), n_traj=300)
show("F=0  ", heat)
