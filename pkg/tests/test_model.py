import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from rdergodic.model import (
    CovarianceSpec,
    DriftPolynomial,
    ModelSpec,
    SpectralField,
    apply_drift,
    constant_projection,
    dirichlet_eigenvalue,
    norms,
    sobolev_norm,
    sup_norm,
    sup_sobolev_constant,
    to_physical,
    to_spectral,
)


def test_eigenvalues():
    assert dirichlet_eigenvalue(1, math.pi) == pytest.approx(1.0, abs=1e-15)
    assert dirichlet_eigenvalue(3, math.pi) == pytest.approx(9.0, abs=1e-12)
    assert dirichlet_eigenvalue(1, 1.0) == pytest.approx(9.8696044, abs=1e-6)
    np.testing.assert_allclose(dirichlet_eigenvalue(np.arange(1, 5), math.pi), [1, 4, 9, 16])


@pytest.mark.parametrize("n,length", [(0, 1.0), (1.5, 1.0), (1, 0.0), (1, -2.0)])
def test_eigenvalue_rejects_bad_input(n, length):
    with pytest.raises(ValueError):
        dirichlet_eigenvalue(n, length)


def test_small_grid_values():
    spec = ModelSpec(n_modes=1, n_colloc=3)
    u = to_physical(spec.mode_field(1), spec)
    expected = math.sqrt(2 / math.pi) * np.sin(np.arange(1, 4) * math.pi / 4)
    np.testing.assert_allclose(u, expected, atol=1e-15)


def test_round_trip():
    rng = np.random.default_rng(0)
    spec = ModelSpec(n_modes=64)
    c = rng.standard_normal((10, 64))
    back = to_spectral(to_physical(c, spec), spec)
    assert np.max(np.abs(back - c)) <= 1e-12


def test_single_field_types():
    spec = ModelSpec(n_modes=8)
    f = spec.mode_field(2, 3.0)
    back = to_spectral(to_physical(f, spec), spec)
    assert isinstance(back, SpectralField)
    np.testing.assert_allclose(back.coeffs, f.coeffs, atol=1e-13)
    assert isinstance(apply_drift(f, spec), SpectralField)


def test_cube_of_first_mode():
    # sin^3 = (3 sin x - sin 3x) / 4
    L = math.pi
    spec = ModelSpec(n_modes=8, drift=DriftPolynomial.cubic())
    eps = 0.3
    out = apply_drift(spec.mode_field(1, eps), spec, as_field=False)
    expected = np.zeros(8)
    expected[0] = -0.75 * (2 / L) * eps**3
    expected[2] = 0.25 * (2 / L) * eps**3
    np.testing.assert_allclose(out, expected, atol=1e-14)


def test_aliasing_guard_single_mode_cube():
    N = 8
    coarse = ModelSpec(n_modes=N, n_colloc=2 * N, drift=DriftPolynomial.cubic())
    fine = ModelSpec(n_modes=N, n_colloc=16 * N, drift=DriftPolynomial.cubic())
    a = apply_drift(coarse.mode_field(1), coarse, as_field=False)
    b = apply_drift(fine.mode_field(1), fine, as_field=False)
    assert np.max(np.abs(a - b)) / np.max(np.abs(b)) < 1e-10


def test_low_modes_match_fine_grid():
    rng = np.random.default_rng(1)
    low = ModelSpec(n_modes=4, n_colloc=16, drift=DriftPolynomial.cubic())
    c4 = rng.standard_normal(4)
    ref = apply_drift(c4, low.replace(n_colloc=64))
    assert np.max(np.abs(apply_drift(c4, low) - ref)) < 1e-10


def test_zero_and_unit_analysis():
    spec = ModelSpec(n_modes=6)
    assert np.all(to_physical(spec.zero_field(), spec) == 0)
    assert np.all(to_spectral(np.zeros(spec.n_colloc), spec).coeffs == 0)
    grid = np.sqrt(2 / math.pi) * np.sin(2 * spec.grid)
    np.testing.assert_allclose(to_spectral(grid, spec).coeffs, [0, 1, 0, 0, 0, 0], atol=1e-12)
    cubic = ModelSpec(n_modes=6, drift=DriftPolynomial.cubic())
    assert np.all(apply_drift(cubic.zero_field(), cubic).coeffs == 0)


def test_linear_drift_is_multiplication():
    spec = ModelSpec(n_modes=12, drift=DriftPolynomial((0.0, -1.0)))
    c = np.linspace(-1, 1, 12)
    np.testing.assert_allclose(apply_drift(c, spec), -c, atol=1e-15)


def test_constant_drift_uses_exact_projection():
    spec = ModelSpec(n_modes=5, drift=DriftPolynomial((2.0,)))
    out = apply_drift(np.zeros(5), spec)
    np.testing.assert_allclose(out, 2.0 * constant_projection(np.arange(1, 6), math.pi))
    assert out[1] == 0.0 and out[3] == 0.0


def test_norms_of_first_mode():
    spec = ModelSpec(n_modes=64)
    n = norms(spec.mode_field(1), spec)
    assert n.l2 == pytest.approx(1.0)
    assert n.sup == pytest.approx(math.sqrt(2 / math.pi), abs=2e-5)
    assert n.sobolev == pytest.approx(1.0)


def test_sup_bounded_by_sobolev():
    rng = np.random.default_rng(2)
    spec = ModelSpec(n_modes=64)
    c = rng.standard_normal((1000, 64)) * rng.uniform(0.01, 10, (1000, 1))
    const = sup_sobolev_constant(spec, 0.75)
    assert np.all(sup_norm(c, spec) <= const * sobolev_norm(c, spec, 0.75) * (1 + 1e-12))


def test_anti_aliasing_bound_enforced():
    with pytest.raises(ValueError, match="M >= 2N"):
        ModelSpec(n_modes=10, n_colloc=15)


def test_default_spec():
    spec = ModelSpec()
    assert spec.n_modes == 64 and spec.n_colloc == 256
    assert spec.length == pytest.approx(math.pi)
    assert spec.drift.coefficients == (0.0, 0.0, 0.0, -1.0)
    assert spec.covariance.kind == "identity"


def test_replace_rescales_grid():
    spec = ModelSpec(n_modes=16).replace(n_modes=32)
    assert spec.n_colloc == 128


def test_drift_polynomial_shape():
    assert DriftPolynomial.cubic().is_dissipative
    assert not DriftPolynomial((0, 0, 0, 1)).is_dissipative
    assert not DriftPolynomial((0, 0, -1)).is_dissipative
    assert DriftPolynomial((1, 2, 0, 0)).coefficients == (1.0, 2.0)
    assert DriftPolynomial.zero().is_zero and DriftPolynomial.zero().degree == 0
    with pytest.raises(ValueError):
        DriftPolynomial((0, math.inf))


def test_covariance_validation():
    with pytest.raises(ValueError, match="check_powerlaw_window"):
        CovarianceSpec.power_law(1.0, 0.3, 0.5)
    with pytest.raises(ValueError):
        CovarianceSpec.explicit([1.0, 0.0])
    with pytest.raises(ValueError):
        ModelSpec(n_modes=4, covariance=CovarianceSpec.explicit([1, 1]))
    spec = ModelSpec(n_modes=4, covariance=CovarianceSpec.power_law(2.0, 0.5))
    np.testing.assert_allclose(spec.lambdas, 2.0 / np.arange(1, 5))


def test_field_is_immutable():
    f = SpectralField([1.0, 2.0])
    with pytest.raises(ValueError):
        f.coeffs[0] = 3.0
    with pytest.raises(ValueError):
        SpectralField([np.nan])


@settings(max_examples=50, deadline=None)
@given(st.lists(st.floats(-100, 100), min_size=6, max_size=6), st.floats(-5, 5))
def test_drift_projection_is_linear_in_linear_part(coeffs, c):
    spec = ModelSpec(n_modes=6, drift=DriftPolynomial((0.0, c)))
    x = np.array(coeffs)
    np.testing.assert_allclose(apply_drift(x, spec), c * x, atol=1e-9)


@settings(max_examples=50, deadline=None)
@given(st.lists(st.floats(-1e3, 1e3), min_size=8, max_size=8))
def test_round_trip_property(coeffs):
    spec = ModelSpec(n_modes=8)
    x = np.array(coeffs)
    np.testing.assert_allclose(to_spectral(to_physical(x, spec), spec), x,
                               atol=1e-12 * max(1.0, np.abs(x).max()))
