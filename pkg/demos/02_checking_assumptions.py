"""Mechanical checks of the standing assumptions.

Each checker returns a verdict with a margin: positive when the assumption
holds, and a witness or a counterexample.
"""
# %%
from rdergodic.hypotheses import (
    check_all,
    check_drift_dissipativity,
    check_powerlaw_window,
    check_smoothing_e9,
)
from rdergodic.model import CovarianceSpec, DriftPolynomial, ModelSpec

# %% The default model: cubic drift, identity covariance, one space dimension
for entry in check_all(ModelSpec()):
    print(f"{entry.hypothesis:36s} passed={entry.passed} margin={entry.verdict.margin:.3g}")

# %% Dissipativity constants for f(u) = -u^3
v = check_drift_dissipativity(DriftPolynomial.cubic(), epsilon=2.0, s=3.0)
print("constants:", v.witness)

# %% A drift with the wrong sign fails with a concrete counterexample
bad = check_drift_dissipativity(DriftPolynomial((0, 0, 0, 1)), 2.0, 3.0)
print("counterexample:", bad.counterexample)

# %% Smoothing needs noise that does not decay too fast: a < 1
for a in (0.5, 0.9, 1.1, 1.5):
    spec = ModelSpec(covariance=CovarianceSpec.power_law(1.0, a))
    print(f"a={a}: smoothing passes={check_smoothing_e9(spec).passed}")

# %% The admissible power-law window in dimensions 1 to 3
for d in (1, 2, 3):
    print(d, [check_powerlaw_window(d, 0.9, b).passed for b in (0.0, 0.3, 0.6, 0.9)])
