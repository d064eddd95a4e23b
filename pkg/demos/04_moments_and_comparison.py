"""Moment bounds.

Without noise the sup-norm of the solution sits below the scalar comparison
equation y' = -c1 y^3 + c3.  With noise, the mean sup-norm after t = 1 is
bounded independently of where the path started.
"""
# %%
import numpy as np

from rdergodic.ergolab import comparison_ode, moment_curve, uniform_moment_bound
from rdergodic.hypotheses import check_drift_dissipativity
from rdergodic.model import ModelSpec, sup_norm
from rdergodic.sim import SimParams, run_ensemble, simulate_trajectory

spec = ModelSpec(n_modes=32)
k = check_drift_dissipativity(spec.drift, 2.0, 3.0).witness

# %% Deterministic path against the comparison curve
x0 = spec.mode_field(1, 500.0)
times = tuple(np.geomspace(1e-3, 2.0, 8))
path = simulate_trajectory(x0, spec, SimParams(t_end=2.0, record_times=times, noise_on=False))
y = comparison_ode(k.c1, k.epsilon, k.c3, float(sup_norm(x0, spec)), 2.0)
for t, s, b in zip(times, sup_norm(path.states, spec), y(np.array(times))):
    print(f"t={t:.4f}  ||Y||={s:9.4f}  comparison={b:9.4f}")

# %% Noisy ensembles from very different starting points
rt = (1.0, 2.0, 3.0)
ens = run_ensemble([spec.mode_field(1, m) for m in (0, 10, 1000)], 200, spec,
                   SimParams(t_end=3.0, record_times=rt, record_yz=True, seed=4))
z3 = max(moment_curve(ens.group(g), part="z", power=3).values.max() for g in range(3))
z1 = max(moment_curve(ens.group(g), part="z").values.max() for g in range(3))
bound = uniform_moment_bound(k.c1, k.epsilon, k.c2 * z3 + k.c3) + z1
for g, m in enumerate((0, 10, 1000)):
    print(f"x0 = {m:5d} e1: E||X(t)|| =", np.round(moment_curve(ens.group(g)).values, 3))
print("uniform bound:", round(bound, 1))
