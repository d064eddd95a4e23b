"""Estimators and analytic oracles for ergodicity experiments.

Moment curves, total-variation estimates on low-dimensional projections,
exponential decay fits, time-to-mixing sweeps over initial conditions, small
set hit frequencies, Doeblin contraction arithmetic and autocorrelation gap
estimates.  Total variation is reported on the ``[0, 1]`` scale
(``sup_A |P(A) - Q(A)|``).
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from typing import Callable, Mapping, Sequence

import numpy as np
from scipy import special, stats
from scipy.integrate import solve_ivp

from .model import ModelSpec, SpectralField, sobolev_norm, sup_norm
from .sim import Ensemble, SimParams, Trajectory, run_ensemble

__all__ = [
    "Curve",
    "DecayFit",
    "DoeblinCertificate",
    "CompactSetSpec",
    "ComparisonCurve",
    "comparison_ode",
    "uniform_moment_bound",
    "bound_2_26",
    "moment_curve",
    "gaussian_tv",
    "tv_histogram",
    "tv_lower",
    "fit_decay",
    "fit_tv_decay",
    "SweepResult",
    "uniformity_sweep",
    "time_to_level",
    "wilson_interval",
    "default_stress_set",
    "MinorizationResult",
    "minorization_probe",
    "doeblin_constants",
    "doeblin_mass",
    "chain_tv",
    "autocorrelation",
    "GapEstimate",
    "stationary_gap",
]


@dataclass
class Curve:
    """A table ``t -> value`` with an optional per-point error and metadata."""

    times: np.ndarray
    values: np.ndarray
    errors: np.ndarray | None = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.times = np.asarray(self.times, float)
        self.values = np.asarray(self.values, float)
        if self.errors is not None:
            self.errors = np.asarray(self.errors, float)
        if self.times.shape != self.values.shape:
            raise ValueError("times and values must have the same shape")

    def __len__(self):
        return self.times.size

    def at(self, t: float) -> float:
        i = int(np.argmin(np.abs(self.times - t)))
        if not math.isclose(self.times[i], t, rel_tol=1e-9, abs_tol=1e-12):
            raise KeyError(f"no point at t={t}")
        return float(self.values[i])

    def to_csv(self, path, value_name: str = "value", error_name: str = "error",
               extra: Mapping[str, Sequence] | None = None) -> None:
        cols = {"time": self.times, value_name: self.values}
        if self.errors is not None:
            cols[error_name] = self.errors
        cols.update(extra or {})
        _write_columns(path, cols)


def _fmt(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return str(int(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return f"{float(v):.17g}"


def _write_columns(path, cols: Mapping[str, Sequence]) -> None:
    names = list(cols)
    rows = zip(*(cols[n] for n in names))
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(names)
        for row in rows:
            w.writerow([_fmt(v) for v in row])


# ----------------------------------------------------------------------------
# decay fits


@dataclass(frozen=True)
class DecayFit:
    """``v(t) ~ amplitude * exp(-gamma_rate * t)`` fitted on ``window``."""

    amplitude: float
    gamma_rate: float
    r2: float
    window: tuple[float, float]
    n_points: int = 0

    def __post_init__(self):
        if not self.amplitude > 0:
            raise ValueError("amplitude must be positive")
        if not 0.0 <= self.r2 <= 1.0:
            raise ValueError("r2 must lie in [0, 1]")

    def __call__(self, t):
        return self.amplitude * np.exp(-self.gamma_rate * np.asarray(t, float))

    def to_dict(self) -> dict:
        return {"amplitude": self.amplitude, "gamma_rate": self.gamma_rate, "r2": self.r2,
                "window": list(self.window), "n_points": self.n_points}


def _curve_arrays(curve, values=None):
    if values is not None:
        return np.asarray(curve, float), np.asarray(values, float)
    if isinstance(curve, Mapping):
        t = np.array(sorted(curve), float)
        return t, np.array([curve[k] for k in sorted(curve)], float)
    if hasattr(curve, "times") and hasattr(curve, "values"):
        return np.asarray(curve.times, float), np.asarray(curve.values, float)
    t, v = curve
    return np.asarray(t, float), np.asarray(v, float)


def fit_decay(curve, window: tuple[float, float] | None = None, *, values=None) -> DecayFit:
    """Least squares of ``log v`` against ``t`` over ``window`` (inclusive).

    ``curve`` is a :class:`Curve`, a mapping ``{t: v}``, a ``(times, values)``
    pair, or times with ``values=`` given separately.
    """
    t, v = _curve_arrays(curve, values)
    if window is not None:
        lo, hi = window
        keep = (t >= lo - 1e-12) & (t <= hi + 1e-12)
        t, v = t[keep], v[keep]
    if t.size < 4:
        raise ValueError(f"need at least 4 points in the fit window, got {t.size}")
    if np.any(~(v > 0)):
        raise ValueError("fit window contains nonpositive values")
    y = np.log(v)
    slope, intercept = np.polyfit(t, y, 1)
    resid = y - (slope * t + intercept)
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    ss_res = float(np.sum(resid**2))
    if ss_tot <= 1e-24 * max(1.0, float(np.sum(y**2))):
        # flat curve: nothing for a decay to explain
        r2 = 0.0
    else:
        r2 = min(1.0, max(0.0, 1.0 - ss_res / ss_tot))
    return DecayFit(float(np.exp(intercept)), float(-slope), r2,
                    (float(t[0]), float(t[-1])), int(t.size))


# ----------------------------------------------------------------------------
# comparison ODE and the uniform moment bound


@dataclass
class ComparisonCurve:
    """Solution of ``y' = -k1 y^(1+eps) + C`` on ``[0, T]``; call it at times."""

    k1: float
    epsilon: float
    C_src: float
    y0: float
    T: float
    _sol: Callable | None = None

    def __call__(self, t):
        t = np.asarray(t, float)
        if np.any((t < -1e-12) | (t > self.T * (1 + 1e-12))):
            raise ValueError(f"t outside [0, {self.T}]")
        if self._sol is None:
            out = self.y0 / (1.0 + self.k1 * self.y0 * t)
        else:
            out = np.maximum(self._sol(np.clip(t, 0, self.T)), 0.0)
            out = out.reshape(t.shape)
        return float(out) if out.ndim == 0 else out


def comparison_ode(k1: float, epsilon: float, C_src: float, y0: float, T: float, *,
                   rtol: float = 1e-10, atol: float = 1e-12) -> ComparisonCurve:
    """Adaptive RK45 solution of the scalar comparison equation.

    Closed form ``y0 / (1 + k1 y0 t)`` when ``epsilon == 1`` and ``C_src == 0``.
    """
    if not (k1 > 0 and epsilon > 0 and C_src >= 0 and y0 >= 0 and T > 0):
        raise ValueError("need k1, epsilon, T > 0 and C_src, y0 >= 0")
    if epsilon == 1 and C_src == 0:
        return ComparisonCurve(k1, epsilon, C_src, y0, T)
    p = 1.0 + epsilon

    def rhs(_, y):
        return -k1 * np.maximum(y, 0.0) ** p + C_src

    # the initial rate k1*y0^(1+eps) sets the first step scale
    first = min(T, 0.01 / max(1e-300, k1 * y0**epsilon)) if y0 > 0 else None
    sol = solve_ivp(rhs, (0.0, T), [float(y0)], method="RK45", rtol=rtol, atol=atol,
                    dense_output=True, first_step=first)
    if not sol.success:
        raise RuntimeError(f"comparison ODE failed: {sol.message}")
    dense = sol.sol
    return ComparisonCurve(k1, epsilon, C_src, y0, T, lambda t: dense(t)[0])


def uniform_moment_bound(k1: float, epsilon: float, C_src: float) -> float:
    """Initial-condition independent bound on the comparison solution for t >= 1:
    ``max((2 C/k1)^(1+eps), (2/(k1 eps) + 2)^(1/eps))``."""
    if not (k1 > 0 and epsilon > 0 and C_src >= 0):
        raise ValueError("need k1, epsilon > 0 and C_src >= 0")
    return max((2.0 * C_src / k1) ** (1.0 + epsilon), (2.0 / (k1 * epsilon) + 2.0) ** (1.0 / epsilon))


bound_2_26 = uniform_moment_bound


# ----------------------------------------------------------------------------
# moments


def _part(ens: Ensemble, part: str) -> np.ndarray:
    if part == "x":
        return ens.snapshots
    if ens.z_snapshots is None:
        raise ValueError("ensemble has no Y/Z record; simulate with record_yz=True")
    return ens.z_snapshots if part == "z" else ens.snapshots - ens.z_snapshots


def moment_curve(ensemble: Ensemble, *, part: str = "x", power: float = 1.0,
                 min_traj: int = 100) -> Curve:
    """Mean grid sup-norm (raised to ``power``) per record time with its MC
    standard error; blown-up trajectories are excluded and counted in ``meta``.

    ``part`` selects the full state ``"x"``, the stochastic convolution ``"z"``
    or the remainder ``"y" = x - z``.
    """
    if part not in ("x", "y", "z"):
        raise ValueError("part must be 'x', 'y' or 'z'")
    if ensemble.blown.size < min_traj:
        raise ValueError(f"need at least {min_traj} trajectories, got {ensemble.blown.size}")
    data = _part(ensemble, part)
    ok = ~ensemble.blown.reshape(-1)
    flat = data.reshape(-1, data.shape[2], data.shape[3])[ok]
    if flat.shape[0] < 2:
        raise ValueError("fewer than two trajectories survived")
    vals = sup_norm(flat, ensemble.spec) ** power
    mean = vals.mean(axis=0)
    se = vals.std(axis=0, ddof=1) / math.sqrt(vals.shape[0])
    return Curve(ensemble.times, mean, se,
                 {"part": part, "power": power, "n_used": int(flat.shape[0]),
                  "n_blown": int((~ok).sum())})


# ----------------------------------------------------------------------------
# total variation


def gaussian_tv(mean1: float, mean2: float, sigma: float) -> float:
    """TV between N(mean1, sigma^2) and N(mean2, sigma^2): ``2 Phi(|d|/(2 sigma)) - 1``."""
    if not sigma > 0:
        raise ValueError("sigma must be positive")
    return float(special.erf(abs(mean1 - mean2) / (2.0 * sigma * math.sqrt(2.0))))


def tv_histogram(a, b, bins: int = 64) -> tuple[float, float, int]:
    """Histogram TV between two samples on a common equal-width grid.

    Returns ``(tv, mc_error, sparse_bins)``.  ``mc_error`` sums the per-bin
    binomial standard deviations of ``|p_A - p_B| / 2``; ``sparse_bins``
    counts bins whose pooled expected count per sample is below 5.
    """
    a, b = np.asarray(a, float).ravel(), np.asarray(b, float).ravel()
    if a.size == 0 or b.size == 0:
        raise ValueError("empty sample")
    if bins < 8:
        raise ValueError("bins must be at least 8")
    lo, hi = min(a.min(), b.min()), max(a.max(), b.max())
    if hi <= lo:
        return 0.0, 0.0, 0
    edges = np.linspace(lo, hi, bins + 1)
    pa = np.histogram(a, edges)[0] / a.size
    pb = np.histogram(b, edges)[0] / b.size
    tv = min(1.0, max(0.0, 0.5 * float(np.abs(pa - pb).sum())))
    err = 0.5 * float(np.sqrt(pa * (1 - pa) / a.size + pb * (1 - pb) / b.size).sum())
    pooled = (pa * a.size + pb * b.size) / (a.size + b.size)
    sparse = int(np.sum(pooled * min(a.size, b.size) < 5))
    return tv, err, sparse


def _projector(projection, spec: ModelSpec):
    if callable(projection):
        return projection
    if projection == "sup":
        return lambda x: sup_norm(x, spec)
    n = int(projection)
    if not 1 <= n <= spec.n_modes:
        raise ValueError(f"mode index must lie in 1..{spec.n_modes}")
    return lambda x: x[:, n - 1]


def tv_lower(ensemble_a: Ensemble, ensemble_b: Ensemble, projection=1, bins: int = 64) -> Curve:
    """Histogram TV estimate per record time between the laws of a scalar
    observable under two ensembles.

    A projection can only shrink total variation, so the estimate targets a
    lower bound of the full-state distance (up to the positive sampling bias
    reported in ``errors``).  ``projection`` is a 1-based mode index,
    ``"sup"`` or a callable on (K, N) coefficient arrays.
    """
    if bins < 8:
        raise ValueError("bins must be at least 8")
    ta, tb = np.asarray(ensemble_a.times), np.asarray(ensemble_b.times)
    if ta.shape != tb.shape or not np.allclose(ta, tb, rtol=1e-12, atol=1e-12):
        raise ValueError("ensembles must share record times")
    proj = _projector(projection, ensemble_a.spec)
    tv, err, sparse = [], [], []
    for i in range(ta.size):
        v, e, s = tv_histogram(proj(ensemble_a.states(i)), proj(ensemble_b.states(i)), bins)
        tv.append(v)
        err.append(e)
        sparse.append(s)
    sparse = np.array(sparse)
    return Curve(ta, tv, err, {"projection": str(projection), "bins": bins,
                               "sparse_bins": sparse.tolist(),
                               "underpopulated": bool(np.any(sparse > 0))})


def fit_tv_decay(curve: Curve, *, snr: float = 3.0, t_min: float = 0.0,
                 max_value: float = 0.95) -> DecayFit:
    """Fit the signal-dominated part of a TV curve: points with
    ``t >= t_min``, ``TV < max_value`` (saturation) and ``TV > snr * error``."""
    t, v = curve.times, curve.values
    e = curve.errors if curve.errors is not None else np.zeros_like(v)
    keep = (t >= t_min) & (v < max_value) & (v > snr * e) & (v > 0)
    if keep.sum() < 4:
        raise ValueError("fewer than 4 signal-dominated points to fit")
    # contiguous run starting at the first kept point
    idx = np.flatnonzero(keep)
    stop = idx[0]
    while stop + 1 < t.size and keep[stop + 1]:
        stop += 1
    sel = slice(idx[0], stop + 1)
    if stop + 1 - idx[0] < 4:
        sel = idx
    return fit_decay(t[sel], values=v[sel])


# ----------------------------------------------------------------------------
# uniformity over initial conditions


def time_to_level(times, values, level: float, *, start_value: float | None = 1.0) -> float | None:
    """First time the curve reaches ``<= level``, linearly interpolated between
    record times; ``start_value`` is the value at ``t = 0`` (Dirac laws with
    distinct projections have TV 1).  ``None`` when never reached."""
    t = np.asarray(times, float)
    v = np.asarray(values, float)
    if start_value is not None and (t.size == 0 or t[0] > 0):
        t = np.concatenate([[0.0], t])
        v = np.concatenate([[start_value], v])
    below = np.flatnonzero(v <= level)
    if below.size == 0:
        return None
    k = int(below[0])
    if k == 0:
        return float(t[0])
    t0, t1, v0, v1 = t[k - 1], t[k], v[k - 1], v[k]
    return float(t0 + (v0 - level) / (v0 - v1) * (t1 - t0))


@dataclass
class SweepResult:
    magnitudes: list[float]
    times: list[float | None]
    curves: list[Curve | None]
    level: float
    blowup_count: int = 0

    @property
    def censored(self) -> list[bool]:
        return [t is None for t in self.times]

    def spread(self) -> float:
        """Ratio of the largest to the smallest positive time (inf if censored)."""
        ts = [t for m, t in zip(self.magnitudes, self.times) if m > 0]
        if any(t is None for t in ts):
            return math.inf
        ts = [t for t in ts if t > 0]
        return max(ts) / min(ts) if ts else 1.0

    def is_increasing(self) -> bool:
        ts = [math.inf if t is None else t for t in self.times]
        return all(b > a for a, b in zip(ts, ts[1:]))

    def to_csv(self, path) -> None:
        _write_columns(path, {
            "magnitude": self.magnitudes,
            "time_to_level": [math.nan if t is None else t for t in self.times],
            "censored": self.censored,
        })


def uniformity_sweep(spec: ModelSpec, magnitudes: Sequence[float], eps_level: float,
                     params: SimParams, *, n_traj: int = 1000, projection=1, bins: int = 64,
                     mode: int = 1, threads: int | None = None) -> SweepResult:
    """Time until the TV estimate between ``m * e_mode`` and ``0`` starts drops
    to ``eps_level``, for each magnitude ``m``.

    Ensemble group 0 is the reference started at 0; group ``k`` starts at
    ``magnitudes[k-1] * e_mode``.  Magnitude 0 is reported as time 0 without
    simulation.
    """
    mags = [float(m) for m in magnitudes]
    if any(m < 0 for m in mags):
        raise ValueError("magnitudes must be nonnegative")
    if not 0 < eps_level < 1:
        raise ValueError("eps_level must lie in (0, 1)")
    active = [m for m in mags if m > 0]
    x0s = [spec.zero_field()] + [spec.mode_field(mode, m) for m in active]
    ens = run_ensemble(x0s, n_traj, spec, params, threads=threads) if active else None
    times, curves = [], []
    k = 0
    for m in mags:
        if m == 0:
            times.append(0.0)
            curves.append(None)
            continue
        k += 1
        curve = tv_lower(ens.group(k), ens.group(0), projection, bins)
        curve.meta["magnitude"] = m
        times.append(time_to_level(curve.times, curve.values, eps_level))
        curves.append(curve)
    return SweepResult(mags, times, curves, eps_level, ens.blowup_count if ens else 0)


# ----------------------------------------------------------------------------
# small sets


@dataclass(frozen=True)
class CompactSetSpec:
    """``{x : grid sup-norm <= R1 and Sobolev(theta) norm <= R2}``."""

    sup_radius: float
    sobolev_theta: float
    sobolev_radius: float

    def __post_init__(self):
        if not (self.sup_radius > 0 and self.sobolev_radius > 0):
            raise ValueError("radii must be positive")
        if not 0.5 < self.sobolev_theta < 1:
            raise ValueError("sobolev_theta must lie in (1/2, 1)")

    def contains(self, states, spec: ModelSpec) -> np.ndarray:
        x = np.asarray(states.coeffs if isinstance(states, SpectralField) else states, float)
        inside = sup_norm(x, spec) <= self.sup_radius
        if math.isfinite(self.sobolev_radius):
            inside = inside & (sobolev_norm(x, spec, self.sobolev_theta) <= self.sobolev_radius)
        return inside


def wilson_interval(hits: int, n: int, confidence: float = 0.95) -> tuple[float, float]:
    if n <= 0:
        raise ValueError("n must be positive")
    z = stats.norm.ppf(0.5 + confidence / 2)
    p = hits / n
    denom = 1 + z * z / n
    centre = (p + z * z / (2 * n)) / denom
    half = z * math.sqrt(p * (1 - p) / n + z * z / (4 * n * n)) / denom
    return max(0.0, centre - half), min(1.0, centre + half)


def default_stress_set(spec: ModelSpec, magnitudes: Sequence[float] = (1e2, 1e4),
                       rough: bool = True) -> list[SpectralField]:
    """``0``, ``+-m e_1`` and (optionally) ``+-m`` times a rough mixed-mode field
    with grid sup-norm 1, for each magnitude ``m``."""
    out = [spec.zero_field()]
    shape = None
    if rough:
        c = np.where(spec.modes % 2 == 1, 1.0, -1.0) / np.sqrt(spec.modes)
        shape = c / float(sup_norm(c, spec))
    for m in magnitudes:
        out += [spec.mode_field(1, m), spec.mode_field(1, -m)]
        if shape is not None:
            out += [SpectralField(m * shape), SpectralField(-m * shape)]
    return out


@dataclass
class MinorizationResult:
    kappa_hat: float
    wilson_lower: float
    hits: list[int]
    n_traj: int
    blown: list[int]
    t_probe: float
    confidence: float
    advice: str = ""

    @property
    def frequencies(self) -> list[float]:
        return [h / self.n_traj for h in self.hits]

    def to_dict(self) -> dict:
        return {"kappa_hat": self.kappa_hat, "wilson_lower": self.wilson_lower,
                "hits": self.hits, "n_traj": self.n_traj, "blown": self.blown,
                "t_probe": self.t_probe, "confidence": self.confidence, "advice": self.advice}


def minorization_probe(spec: ModelSpec, stress_x0s, K: CompactSetSpec, t_probe: float = 2.0,
                       n_traj: int = 2000, *, params: SimParams | None = None,
                       confidence: float = 0.95, threads: int | None = None) -> MinorizationResult:
    """Smallest empirical probability, over the stress initial states, of being
    in ``K`` at ``t_probe``; the Wilson lower bound is taken at the minimiser.
    Blown-up trajectories count as misses."""
    x0s = list(stress_x0s)
    if not x0s:
        raise ValueError("stress set must be non-empty")
    base = params or SimParams()
    p = base.replace(t_end=t_probe, record_times=(t_probe,), record_yz=False)
    ens = run_ensemble(x0s, n_traj, spec, p, threads=threads)
    hits, blown = [], []
    for g in range(len(x0s)):
        states = ens.snapshots[g, :, 0]
        ok = ~ens.blown[g]
        inside = np.zeros(n_traj, bool)
        inside[ok] = K.contains(states[ok], spec)
        hits.append(int(inside.sum()))
        blown.append(int((~ok).sum()))
    worst = int(np.argmin(hits))
    kappa = hits[worst] / n_traj
    lower = wilson_interval(hits[worst], n_traj, confidence)[0]
    advice = ""
    if hits[worst] == 0:
        kappa, lower = 0.0, 0.0
        advice = (f"no trajectory from stress state {worst} entered K by t={t_probe}; "
                  "enlarge the radii or lengthen t_probe")
    return MinorizationResult(kappa, lower, hits, n_traj, blown, t_probe, confidence, advice)


# ----------------------------------------------------------------------------
# Doeblin arithmetic


@dataclass(frozen=True)
class DoeblinCertificate:
    """Whole-space minorization of the time-``T_steps`` kernel with mass ``m0``."""

    T_steps: float
    m0: float

    def __post_init__(self):
        if not self.T_steps > 0:
            raise ValueError("T_steps must be positive")
        if not 0 < self.m0 < 1:
            raise ValueError("m0 must lie in (0, 1)")

    @property
    def q(self) -> float:
        return 1.0 - self.m0


def doeblin_constants(cert: DoeblinCertificate) -> tuple[float, float]:
    """``(C, gamma) = (1/q, -log(q)/T)`` with ``q = 1 - m0``, so that
    ``TV(t) <= C exp(-gamma t) TV(0)``."""
    q = cert.q
    beta = -math.log(q)
    return 1.0 / q, beta / cert.T_steps


def doeblin_mass(P) -> float:
    """``sum_j min_i P_ij``: the largest mass minorizing every row."""
    P = np.asarray(P, float)
    if P.ndim != 2 or P.shape[0] != P.shape[1]:
        raise ValueError("P must be square")
    if np.any(P < 0) or not np.allclose(P.sum(axis=1), 1.0, atol=1e-12):
        raise ValueError("P must be a stochastic matrix")
    return float(P.min(axis=0).sum())


def chain_tv(P, mu, nu, n_steps: int) -> np.ndarray:
    """Exact ``TV(mu P^n, nu P^n)`` for ``n = 0..n_steps``."""
    P = np.asarray(P, float)
    d = np.asarray(mu, float) - np.asarray(nu, float)
    out = [0.5 * float(np.abs(d).sum())]
    for _ in range(n_steps):
        d = d @ P
        out.append(0.5 * float(np.abs(d).sum()))
    return np.array(out)


# ----------------------------------------------------------------------------
# autocorrelation gap


def autocorrelation(x, max_lag: int) -> np.ndarray:
    """Biased sample autocorrelation ``rho(0..max_lag)`` via FFT."""
    x = np.asarray(x, float)
    x = x - x.mean()
    n = x.size
    if n < 2 or max_lag >= n:
        raise ValueError("series too short for the requested lags")
    size = 1 << (2 * n - 1).bit_length()
    f = np.fft.rfft(x, size)
    acov = np.fft.irfft(f * np.conj(f), size)[: max_lag + 1] / n
    if acov[0] == 0:
        raise ValueError("constant series")
    return acov / acov[0]


@dataclass
class GapEstimate:
    fit: DecayFit
    lags: np.ndarray
    acf: np.ndarray
    burn_in: float
    reversible_assumed: bool
    decorrelated: bool = False
    note: str = ""

    @property
    def gamma_rate(self) -> float:
        return self.fit.gamma_rate

    def to_dict(self) -> dict:
        return {"fit": self.fit.to_dict(), "burn_in": self.burn_in,
                "reversible_assumed": self.reversible_assumed,
                "decorrelated": self.decorrelated, "note": self.note}


def stationary_gap(trajectory: Trajectory, observable=1, *, spec: ModelSpec | None = None,
                   burn_in: float | None = None, gamma_prelim: float | None = None,
                   max_lag_time: float | None = None, acf_floor: float = 0.2,
                   assume_reversible: bool = True) -> GapEstimate:
    """Decay rate of the autocorrelation of an observable along one long path.

    Samples with ``t < burn_in`` are dropped; if ``burn_in`` is None and
    ``gamma_prelim`` is given, ``burn_in = 10 / gamma_prelim``.  The fit uses
    lags from 0 up to the first lag where the autocorrelation falls below
    ``acf_floor``.  Reading the rate as a spectral gap presumes a reversible
    (gradient-type) dynamics; this is recorded, not verified.
    """
    t = np.asarray(trajectory.times, float)
    if t.size < 16:
        raise ValueError("path too short")
    dts = np.diff(t)
    if not np.allclose(dts, dts[0], rtol=1e-6):
        raise ValueError("autocorrelation needs equally spaced record times")
    lag_dt = float(dts[0])
    if burn_in is None:
        burn_in = 10.0 / gamma_prelim if gamma_prelim else 0.0
    states = np.asarray(trajectory.states, float)[t >= t[0] + burn_in - 1e-12]
    if states.shape[0] < 16:
        raise ValueError("burn-in leaves too few samples")
    if callable(observable):
        obs = np.asarray(observable(states), float)
    elif observable == "sup":
        if spec is None:
            raise ValueError("the sup observable needs spec")
        obs = sup_norm(states, spec)
    else:
        obs = states[:, int(observable) - 1]
    n = obs.size
    max_lag = n // 4 if max_lag_time is None else min(n - 1, int(round(max_lag_time / lag_dt)))
    rho = autocorrelation(obs, max_lag)
    lags = np.arange(rho.size) * lag_dt
    below = np.flatnonzero(rho < acf_floor)
    stop = int(below[0]) if below.size else rho.size
    note = "" if assume_reversible else "reversibility not assumed: rate is an autocorrelation time only"
    if stop < 4:
        # correlation gone within a few lags: report the one-lag rate
        r1 = max(float(rho[1]), 1e-300) if rho.size > 1 else 1e-300
        fit = DecayFit(1.0, -math.log(r1) / lag_dt, 0.0, (0.0, lag_dt), 2)
        return GapEstimate(fit, lags, rho, float(burn_in), assume_reversible, True,
                           (note + "; " if note else "") + "decorrelated within 4 lags")
    fit = fit_decay(lags[:stop], values=rho[:stop])
    return GapEstimate(fit, lags, rho, float(burn_in), assume_reversible, False, note)
