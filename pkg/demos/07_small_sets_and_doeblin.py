"""Small sets and the Doeblin contraction.

From every stress state, including fields of size 10^4, a positive fraction
of paths is inside a fixed compact set at time 2.  A whole-space minorization
with mass m0 contracts total variation by 1 - m0 per period.
"""
# %%
import numpy as np

from rdergodic.ergolab import (
    CompactSetSpec,
    DoeblinCertificate,
    chain_tv,
    default_stress_set,
    doeblin_constants,
    doeblin_mass,
    minorization_probe,
)
from rdergodic.model import ModelSpec
from rdergodic.sim import SimParams

spec = ModelSpec(n_modes=32)
K = CompactSetSpec(sup_radius=5.0, sobolev_theta=0.75, sobolev_radius=50.0)
stress = default_stress_set(spec, (1e2, 1e4))
res = minorization_probe(spec, stress, K, t_probe=2.0, n_traj=200, params=SimParams(seed=2))
print("hit frequencies:", res.frequencies)
print("kappa_hat", res.kappa_hat, "Wilson lower bound", round(res.wilson_lower, 3))

# %% Doeblin arithmetic on an exact two-state chain
cert = DoeblinCertificate(T_steps=5.0, m0=0.5)
print("(C, gamma) =", doeblin_constants(cert))
P = np.array([[0.75, 0.25], [0.25, 0.75]])
print("Doeblin mass", doeblin_mass(P))
print("TV after n periods:", chain_tv(P, [1, 0], [0, 1], 6))
