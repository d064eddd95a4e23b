"""Spectral representation of a field on (0, pi).

A state is a vector of sine coefficients.  The nonlinearity is applied on a
collocation grid with four points per mode, then projected back.
"""
# %%
import numpy as np

from rdergodic.model import ModelSpec, apply_drift, norms, to_physical, to_spectral

spec = ModelSpec(n_modes=16)
print("first eigenvalues:", spec.alphas[:4])
print("grid points:", spec.n_colloc)

# %% Round trip of a random band-limited field
rng = np.random.default_rng(0)
c = rng.standard_normal(16) / np.arange(1, 17)
back = to_spectral(to_physical(c, spec), spec, as_field=False)
print("round-trip error:", np.max(np.abs(back - c)))

# %% The cubic drift moves energy from mode 1 into mode 3
u = spec.mode_field(1, 0.5)
print("F(0.5 e1) first modes:", np.round(apply_drift(u, spec).coeffs[:4], 6))

# %% Three norms of the first eigenfunction
print({k: round(float(v), 4) for k, v in norms(spec.mode_field(1), spec)._asdict().items()})
