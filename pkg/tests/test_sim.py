import csv
import math

import numpy as np
import pytest

from rdergodic.model import CovarianceSpec, DriftPolynomial, ModelSpec, sup_norm
from rdergodic.sim import (
    BlowUpError,
    SimParams,
    child_seed,
    convolution_step,
    run_ensemble,
    simulate_trajectory,
    step,
)

ZERO = DriftPolynomial.zero()


def ou_spec(n=1, lam=2.0, drift=ZERO):
    return ModelSpec(n_modes=n, drift=drift, covariance=CovarianceSpec.power_law(lam, 0.0))


# -- exact convolution

def test_convolution_step_limits():
    assert convolution_step(5.0, 1.3, 0.7, 0.0, 1.234) == 5.0
    g = np.random.default_rng(0).standard_normal(200_000)
    z = convolution_step(np.zeros_like(g), 1.0, 2.0, math.inf, g)
    assert abs(z.var() - 1.0) < 4 * math.sqrt(2 / g.size)


def test_convolution_step_one_step_variance():
    g = np.random.default_rng(1).standard_normal(1_000_000)
    z = convolution_step(0.0, 1.0, 2.0, 0.1, g)
    target = -math.expm1(-0.2)
    assert target == pytest.approx(0.181269, abs=1e-6)
    se = target * math.sqrt(2 / g.size)
    assert abs(z.var() - target) < 3 * se


# -- single steps

def test_pure_decay():
    spec = ModelSpec(n_modes=1, drift=ZERO)
    out = step(np.array([1.0]), spec, 1.0)
    assert out[0] == pytest.approx(math.exp(-1), rel=1e-15)


def test_cubic_equilibrium():
    spec = ModelSpec(n_modes=8)
    assert np.all(step(np.zeros(8), spec, 1e-3) == 0)
    f = step(spec.zero_field(), spec, 1e-3)
    assert np.all(f.coeffs == 0)


def test_constant_forcing_steady_state():
    m = 1.7
    spec = ModelSpec(n_modes=1, drift=DriftPolynomial((m,)))
    out = step(np.zeros(1), spec, 1e3)
    assert out[0] == pytest.approx(m * spec.constant_modes[0] / spec.alphas[0], rel=1e-14)


def test_semigroup_consistency():
    spec = ModelSpec(n_modes=16, drift=ZERO)
    x = np.linspace(-3, 3, 16)
    two = step(step(x, spec, 0.05), spec, 0.05)
    one = step(x, spec, 0.1)
    np.testing.assert_allclose(two, one, rtol=1e-14, atol=1e-300)


def test_step_with_explicit_noise_matches_rng():
    spec = ModelSpec(n_modes=4)
    rng = np.random.default_rng(3)
    noise = np.random.default_rng(3).standard_normal(4)
    a = step(np.ones(4), spec, 1e-2, rng)
    b = step(np.ones(4), spec, 1e-2, noise=noise)
    np.testing.assert_array_equal(a, b)


def test_blowup_is_reported():
    spec = ModelSpec(n_modes=4, drift=DriftPolynomial((0, 0, 0, 1)))
    with pytest.raises(BlowUpError) as info:
        step(np.array([1e4, 0, 0, 0]), spec, 1e-2, scheme="explicit")
    assert info.value.mode >= 1
    with pytest.raises(BlowUpError):
        simulate_trajectory(spec.mode_field(1, 50.0), spec,
                            SimParams(dt=1e-2, t_end=5.0, noise_on=False))


def test_ensemble_keeps_going_after_blowup():
    spec = ModelSpec(n_modes=4, drift=DriftPolynomial((0, 0, 0, 1)))
    ens = run_ensemble([spec.zero_field(), spec.mode_field(1, 50.0)], 4, spec,
                       SimParams(dt=1e-2, t_end=2.0, record_times=(0.01, 2.0), noise_on=False))
    assert ens.blown[1].all() and not ens.blown[0].any()
    assert ens.blowup_count == 4 and ens.blowup_fraction == 0.5
    assert np.all(np.isfinite(ens.blowup_time[1]))
    assert np.isnan(ens.snapshots[1, :, -1]).all()
    assert ens.states(1).shape == (4, 4)


# -- schemes

def test_explicit_and_flow_agree_for_small_steps():
    spec = ModelSpec(n_modes=16)
    x0 = spec.mode_field(1, 2.0)
    p = SimParams(dt=1e-4, t_end=0.2, noise_on=False)
    a = simulate_trajectory(x0, spec, p).states[-1]
    b = simulate_trajectory(x0, spec, p.replace(scheme="explicit")).states[-1]
    # both are first order; they differ by O(dt)
    assert np.max(np.abs(a - b)) < 1e-3
    c = simulate_trajectory(x0, spec, p.replace(dt=5e-5)).states[-1]
    assert np.max(np.abs(c - a)) < np.max(np.abs(a - b))


def test_flow_handles_huge_initial_data():
    spec = ModelSpec(n_modes=32)
    p = SimParams(dt=1e-3, t_end=0.1, noise_on=False)
    tr = simulate_trajectory(spec.mode_field(1, 1e6), spec, p)
    assert np.all(np.isfinite(tr.states)) and sup_norm(tr.states[-1], spec) < 10


def test_deterministic_sup_norm_decays():
    spec = ModelSpec(n_modes=32)
    rng = np.random.default_rng(4)
    x0 = rng.standard_normal(32) * 20 / np.arange(1, 33)
    times = tuple(np.round(np.arange(1, 41) * 0.05, 10))
    tr = simulate_trajectory(x0, spec, SimParams(dt=1e-3, t_end=2.0, record_times=times,
                                                 noise_on=False))
    s = sup_norm(tr.states, spec)
    assert np.all(np.diff(s[4:]) <= 1e-12)


def test_weak_order_ratio():
    # deterministic: error differences between dt, dt/2, dt/4 shrink by about 2
    spec = ModelSpec(n_modes=16)
    x0 = spec.mode_field(1, 3.0) + spec.mode_field(2, -1.0)

    def second_moment(dt):
        tr = simulate_trajectory(x0, spec, SimParams(dt=dt, t_end=1.0, noise_on=False))
        return tr.states[-1, 0] ** 2

    m = [second_moment(dt) for dt in (4e-3, 2e-3, 1e-3)]
    ratio = (m[0] - m[1]) / (m[1] - m[2])
    assert 1.5 <= ratio <= 2.5


# -- linear exactness and stationarity

def test_linear_model_exact_in_distribution():
    c = -0.5
    spec = ou_spec(n=2, lam=1.5, drift=DriftPolynomial((0.0, c)))
    x0 = np.array([1.0, -2.0])
    dt = 0.3
    ens = run_ensemble([x0], 100_000, spec, SimParams(dt=dt, t_end=dt, seed=11))
    samples = ens.states(0)
    k = spec.alphas - c
    mean = x0 * np.exp(-k * dt)
    var = spec.lambdas * -np.expm1(-2 * k * dt) / (2 * k)
    n = samples.shape[0]
    assert np.all(np.abs(samples.mean(0) - mean) < 4 * np.sqrt(var / n))
    assert np.all(np.abs(samples.var(0, ddof=1) - var) < 4 * var * math.sqrt(2 / (n - 1)))


def test_linear_model_exact_for_any_step():
    spec = ModelSpec(n_modes=3, drift=DriftPolynomial((0.0, 0.5)))
    x0 = np.array([1.0, 2.0, 3.0])
    coarse = simulate_trajectory(x0, spec, SimParams(dt=0.5, t_end=1.0, noise_on=False))
    k = spec.alphas - 0.5
    np.testing.assert_allclose(coarse.states[-1], x0 * np.exp(-k), rtol=1e-13)


def test_stationary_variance():
    spec = ModelSpec(n_modes=4, drift=ZERO)
    times = tuple(float(t) for t in np.arange(5, 2005, 5.0))
    tr = simulate_trajectory(spec.zero_field(), spec,
                             SimParams(dt=0.5, t_end=times[-1], record_times=times, seed=2))
    var = tr.states.var(axis=0)
    target = spec.lambdas / (2 * spec.alphas)
    assert np.all(np.abs(var - target) < 4 * target * math.sqrt(2 / len(times)))


def test_yz_decomposition():
    spec = ModelSpec(n_modes=8)
    p = SimParams(dt=1e-3, t_end=0.2, record_times=(0.1, 0.2), record_yz=True, seed=5)
    tr = simulate_trajectory(spec.mode_field(1, 5.0), spec, p)
    plain = simulate_trajectory(spec.mode_field(1, 5.0), spec, p.replace(record_yz=False))
    np.testing.assert_array_equal(tr.states, plain.states)
    np.testing.assert_allclose(tr.y + tr.z, tr.states, atol=1e-12)
    det = simulate_trajectory(spec.mode_field(1, 5.0), spec, p.replace(noise_on=False))
    assert np.max(np.abs(tr.y - det.states)) < 0.5


# -- record times and seeds

def test_record_time_snapping():
    p = SimParams(dt=0.3, t_end=1.0, record_times=(0.5, 1.0))
    sched = p.schedule()
    assert [n for _, n in sched] == [2, 2]
    assert sum(dt * n for dt, n in sched) == pytest.approx(1.0, abs=1e-15)
    spec = ModelSpec(n_modes=1, drift=ZERO)
    tr = simulate_trajectory(np.array([1.0]), spec, p.replace(noise_on=False))
    np.testing.assert_allclose(tr.states[:, 0], np.exp(-np.array([0.5, 1.0])), rtol=1e-14)


def test_zero_record_time_returns_initial_state():
    spec = ModelSpec(n_modes=2)
    tr = simulate_trajectory(np.array([1.0, 2.0]), spec, SimParams(t_end=0.01, record_times=(0.0, 0.01)))
    np.testing.assert_array_equal(tr.states[0], [1.0, 2.0])


@pytest.mark.parametrize("kw", [dict(dt=0), dict(record_times=(0.5, 0.2)), dict(record_times=(2.0,)),
                                dict(scheme="rk4"), dict(seed=-1), dict(record_times=())])
def test_params_validation(kw):
    with pytest.raises(ValueError):
        SimParams(**kw)


def test_child_seed_is_stable():
    assert child_seed(0, 0, 0) == child_seed(0, 0, 0)
    assert len({child_seed(0, g, i) for g in range(3) for i in range(100)}) == 300
    assert child_seed(1, 0, 0) != child_seed(0, 0, 0)


def test_same_seed_same_path():
    spec = ModelSpec(n_modes=16)
    p = SimParams(dt=1e-3, t_end=0.1, record_times=(0.05, 0.1), seed=9)
    a = simulate_trajectory(spec.mode_field(1, 3.0), spec, p)
    b = simulate_trajectory(spec.mode_field(1, 3.0), spec, p)
    np.testing.assert_array_equal(a.states, b.states)
    c = simulate_trajectory(spec.mode_field(1, 3.0), spec, p.replace(seed=10))
    assert not np.array_equal(a.states, c.states)


def test_single_path_matches_ensemble_member():
    spec = ModelSpec(n_modes=8)
    p = SimParams(dt=1e-3, t_end=0.05, seed=3)
    ens = run_ensemble([spec.zero_field(), spec.mode_field(1, 2.0)], 5, spec, p)
    tr = simulate_trajectory(spec.mode_field(1, 2.0), spec, p, x0_index=1, traj_index=3)
    np.testing.assert_array_equal(ens.snapshots[1, 3], tr.states)


def test_threads_and_chunks_do_not_matter():
    spec = ModelSpec(n_modes=16)
    p = SimParams(dt=1e-3, t_end=0.05, record_times=(0.02, 0.05), seed=4)
    x0s = [spec.zero_field(), spec.mode_field(1, 10.0)]
    a = run_ensemble(x0s, 40, spec, p)
    b = run_ensemble(x0s, 40, spec, p, chunk_size=7, threads=3)
    np.testing.assert_array_equal(a.snapshots, b.snapshots)
    np.testing.assert_array_equal(a.seeds, b.seeds)


def test_more_trajectories_keep_earlier_ones():
    spec = ModelSpec(n_modes=8)
    p = SimParams(dt=1e-3, t_end=0.03, seed=6)
    small = run_ensemble([spec.zero_field()], 10, spec, p)
    big = run_ensemble([spec.zero_field()], 25, spec, p)
    np.testing.assert_array_equal(big.snapshots[:, :10], small.snapshots)


def test_noise_off_trajectories_coincide():
    spec = ModelSpec(n_modes=8)
    ens = run_ensemble([spec.mode_field(2, 4.0)], 6, spec,
                       SimParams(dt=1e-3, t_end=0.05, noise_on=False))
    assert np.all(ens.snapshots[0] == ens.snapshots[0, :1])


def test_no_blowups_from_moderate_data():
    spec = ModelSpec()
    ens = run_ensemble([spec.zero_field(), spec.mode_field(1, 100.0)], 1000, spec,
                       SimParams(dt=1e-3, t_end=0.3, seed=1))
    assert ens.blowup_count == 0


def test_n_traj_lower_bound():
    spec = ModelSpec(n_modes=4)
    with pytest.raises(ValueError):
        run_ensemble([spec.zero_field()], 1, spec, SimParams())
    with pytest.raises(ValueError):
        run_ensemble([np.zeros(3)], 2, spec, SimParams())


def test_csv_and_manifest(tmp_path):
    spec = ModelSpec(n_modes=3)
    ens = run_ensemble([spec.zero_field(), spec.mode_field(1, 1.0)], 2, spec,
                       SimParams(dt=1e-2, t_end=0.1, record_times=(0.05, 0.1), seed=8))
    path = tmp_path / "snap.csv"
    ens.to_csv(path)
    rows = list(csv.reader(path.open()))
    assert rows[0] == ["traj_id", "time", "coeff_1", "coeff_2", "coeff_3"]
    assert len(rows) == 1 + 2 * 2 * 2
    assert [r[0] for r in rows[1:]] == ["0", "0", "1", "1", "2", "2", "3", "3"]
    assert float(rows[1][2]) == ens.snapshots[0, 0, 0, 0]
    man = ens.manifest()
    assert man["seed"] == 8 and man["blowup_count"] == 0 and man["n_traj"] == 2
    assert ens.group(1).x0_indices == (1,)
    assert ens.time_index(0.1) == 1
    with pytest.raises(KeyError):
        ens.time_index(0.07)
