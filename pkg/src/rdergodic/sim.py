"""Time integration of the truncated mild equation.

Per mode the linear part ``-alpha_n + f'(0)`` and the additive noise are
integrated exactly (Ornstein-Uhlenbeck transition); the constant term of the
drift enters through the exact ``phi_1`` weight and the remaining nonlinear
part ``g`` (degree >= 2) is frozen over the step::

    x_n <- exp(-k_n dt) x_n + phi_1(k_n, dt) (m_n + G_n(x)) + sd_n(dt) xi_n

With ``scheme="explicit"``, ``G`` is the Galerkin projection of ``g(u)``.  The
default ``"flow"`` scheme uses ``G = P[(Phi_dt(u) - u) / dt]`` where ``Phi_dt``
is the exact flow of ``v' = g(v)`` at each collocation point (integrated with
RK4, adaptively where ``dt * |g'(u)|`` is large).  Both are first order; the
flow increment stays bounded for arbitrarily large states of a dissipative
drift, where the explicit increment overflows once ``dt * |g'(u)| >> 1``.

Every trajectory draws its Gaussians from its own Philox stream keyed by
``child_seed(seed, x0_index, traj_index)``, so results do not depend on how
trajectories are chunked or scheduled.
"""

from __future__ import annotations

import csv
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Sequence

import numba
import numpy as np
from numpy.polynomial import polynomial as P

from .model import ModelSpec, SpectralField, to_physical

__all__ = [
    "SimParams",
    "BlowUpError",
    "Trajectory",
    "Ensemble",
    "convolution_step",
    "child_seed",
    "step",
    "simulate_trajectory",
    "run_ensemble",
    "BLOWUP_LIMIT",
    "THREADS_ENV",
]

BLOWUP_LIMIT = 1e8
THREADS_ENV = "RDERGODIC_THREADS"
# steps of Gaussians drawn per trajectory per block; any value gives the same stream
_NOISE_BLOCK = 256


class BlowUpError(RuntimeError):
    def __init__(self, mode: int, time: float, value: float):
        self.mode, self.time, self.value = mode, time, value
        super().__init__(
            f"coefficient of mode {mode} reached {value:.3g} at t={time:.6g} "
            "(drift not dissipative enough for this step size?)"
        )


@dataclass(frozen=True)
class SimParams:
    dt: float = 1e-3
    t_end: float = 1.0
    record_times: tuple[float, ...] | None = None
    seed: int = 0
    noise_on: bool = True
    scheme: str = "flow"
    record_yz: bool = False

    def __post_init__(self):
        if not (self.dt > 0 and self.t_end > 0):
            raise ValueError("dt and t_end must be positive")
        rt = (self.t_end,) if self.record_times is None else tuple(float(t) for t in self.record_times)
        if not rt:
            raise ValueError("record_times must not be empty")
        if any(b < a for a, b in zip(rt, rt[1:])):
            raise ValueError("record_times must be sorted")
        if rt[0] < 0 or rt[-1] > self.t_end * (1 + 1e-12):
            raise ValueError("record_times must lie in [0, t_end]")
        if self.scheme not in ("flow", "explicit"):
            raise ValueError(f"unknown scheme {self.scheme!r}")
        if not 0 <= int(self.seed) < 2**64:
            raise ValueError("seed must be a 64-bit unsigned integer")
        object.__setattr__(self, "record_times", rt)
        object.__setattr__(self, "seed", int(self.seed))

    def schedule(self) -> list[tuple[float, int]]:
        """(dt_k, n_steps_k) per record interval; dt is snapped down so each
        record time is a step boundary."""
        out, prev = [], 0.0
        for t in self.record_times:
            gap = t - prev
            n = 0 if gap <= 0 else max(1, math.ceil(gap / self.dt - 1e-9))
            out.append((gap / n if n else 0.0, n))
            prev = t
        return out

    def replace(self, **changes) -> SimParams:
        from dataclasses import replace

        return replace(self, **changes)


def convolution_step(z, alpha, lam, dt, gaussian):
    """Exact transition of ``dZ = -alpha Z dt + sqrt(lam) dW`` over ``dt``."""
    z, alpha, lam, gaussian = map(np.asarray, (z, alpha, lam, gaussian))
    decay = np.exp(-alpha * dt)
    sd = np.sqrt(lam * -np.expm1(-2 * alpha * dt) / (2 * alpha))
    out = decay * z + sd * gaussian
    return float(out) if out.ndim == 0 else out


def child_seed(seed: int, x0_index: int, traj_index: int) -> int:
    """64-bit seed of one trajectory.

    ``numpy.random.SeedSequence(seed, spawn_key=(x0_index, traj_index))``
    hashed to a single uint64; the algorithm is fixed by numpy and
    platform independent.
    """
    ss = np.random.SeedSequence(int(seed), spawn_key=(int(x0_index), int(traj_index)))
    return int(ss.generate_state(1, np.uint64)[0])


def _rng(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(key=seed))


@dataclass(frozen=True)
class _Linear:
    decay: np.ndarray
    phi: np.ndarray
    sd: np.ndarray


@lru_cache(maxsize=64)
def _linear(spec: ModelSpec, dt: float) -> _Linear:
    k = spec.alphas - spec.drift.linear
    with np.errstate(divide="ignore", invalid="ignore"):
        phi = np.where(k == 0, dt, -np.expm1(-k * dt) / k)
        var = np.where(k == 0, dt, -np.expm1(-2 * k * dt) / (2 * k))
    return _Linear(np.exp(-k * dt), phi, np.sqrt(spec.lambdas * var))


_KERNEL_BLOCK = 512
# bound on dt*|g'| for a single RK4 step, and on h*|g'| for substeps
_FLOW_CFL = 0.05
_FLOW_SUBSTEP_CFL = 0.5
_FLOW_MAX_SUBSTEPS = 100_000


@numba.njit(cache=True, error_model="numpy")
def _poly_and_slope(coef, v):
    nc = coef.size
    p, dp = coef[nc - 1], 0.0
    for k in range(nc - 2, -1, -1):
        dp = dp * v + p
        p = p * v + coef[k]
    return p, dp


@numba.njit(cache=True, error_model="numpy")
def _flow_rate(u, coef, dt, cfl, sub_cfl, max_substeps, out):
    """Per point: ``(phi_dt(u) - u) / dt`` where ``phi`` is the flow of
    ``v' = g(v)``.

    Points with ``dt*|g'(u)| <= cfl`` take one RK4 step, processed in
    cache-sized blocks with the coefficient loop outermost so the point loop
    vectorizes.  The rest are integrated by RK4 with ``h*|g'(v)| <= sub_cfl``;
    a point needing more than ``max_substeps`` substeps (finite-time growth)
    yields NaN.
    """
    nc = coef.size
    xs = u.reshape(-1)
    res = out.reshape(-1)
    B = _KERNEL_BLOCK
    x = np.empty(B)
    acc = np.empty(B)
    st = np.empty(B)
    p = np.empty(B)
    dp = np.empty(B)
    for lo in range(0, xs.size, B):
        m = min(B, xs.size - lo)
        for i in range(m):
            x[i] = xs[lo + i]
            st[i] = x[i]
        # classical RK4: stages evaluated at x + c*dt*k_prev
        for stage in range(4):
            for i in range(m):
                p[i] = coef[nc - 1]
                dp[i] = 0.0
            for k in range(nc - 2, -1, -1):
                c = coef[k]
                for i in range(m):
                    dp[i] = dp[i] * st[i] + p[i]
                    p[i] = p[i] * st[i] + c
            if stage == 0:
                for i in range(m):
                    # slope at the start decides which points need substeps
                    acc[i] = p[i] if dt * abs(dp[i]) <= cfl else np.nan
                    st[i] = x[i] + 0.5 * dt * p[i]
            elif stage == 1:
                for i in range(m):
                    acc[i] += 2.0 * p[i]
                    st[i] = x[i] + 0.5 * dt * p[i]
            elif stage == 2:
                for i in range(m):
                    acc[i] += 2.0 * p[i]
                    st[i] = x[i] + dt * p[i]
            else:
                for i in range(m):
                    acc[i] += p[i]
        for i in range(m):
            if acc[i] == acc[i]:
                res[lo + i] = acc[i] / 6.0
                continue
            v = x[i]
            remaining = dt
            n = 0
            while remaining > 0.0 and n < max_substeps:
                g1, d1 = _poly_and_slope(coef, v)
                scale = abs(d1) + abs(g1) / (1.0 + abs(v))
                h = remaining if scale * remaining <= sub_cfl else sub_cfl / scale
                g2, _ = _poly_and_slope(coef, v + 0.5 * h * g1)
                g3, _ = _poly_and_slope(coef, v + 0.5 * h * g2)
                g4, _ = _poly_and_slope(coef, v + h * g3)
                v += h * (g1 + 2.0 * g2 + 2.0 * g3 + g4) / 6.0
                remaining -= h
                n += 1
                if not (abs(v) < 1e300):
                    break
            res[lo + i] = (v - x[i]) / dt if remaining <= 0.0 and abs(v) < 1e300 else np.nan
    return out


def _nonlinear_increment(x: np.ndarray, spec: ModelSpec, dt: float, scheme: str) -> np.ndarray:
    coef = spec.drift.nonlinear
    u = x @ spec.synthesis
    with np.errstate(over="ignore", invalid="ignore"):
        if scheme == "explicit":
            gv = P.polyval(u, coef)
        else:
            gv = _flow_rate(np.ascontiguousarray(u), coef, dt, _FLOW_CFL, _FLOW_SUBSTEP_CFL,
                            _FLOW_MAX_SUBSTEPS,
                            np.empty_like(u))
    return gv @ spec.analysis


def _advance(x, spec, dt, noise, scheme, z=None):
    """One step for a batch ``x`` of shape (B, N); ``noise`` is (B, N) or None."""
    lin = _linear(spec, dt)
    forcing = spec.drift.constant * spec.constant_modes if spec.drift.constant else 0.0
    G = _nonlinear_increment(x, spec, dt, scheme) if spec.drift.has_nonlinear else 0.0
    eta = lin.sd * noise if noise is not None else 0.0
    new = lin.decay * x + lin.phi * (forcing + G) + eta
    if z is not None:
        z = lin.decay * z + lin.phi * forcing + eta
    return new, z


def step(state, spec: ModelSpec, dt: float, rng: np.random.Generator | None = None, *,
         noise=None, scheme: str = "flow"):
    """Advance ``state`` by ``dt``; noise from ``rng`` or an explicit ``noise``
    array of standard normals (neither means deterministic).

    Raises :class:`BlowUpError` when a coefficient leaves ``[-1e8, 1e8]``.
    """
    is_field = isinstance(state, SpectralField)
    x = np.atleast_2d(np.asarray(state.coeffs if is_field else state, dtype=float))
    if noise is None and rng is not None:
        noise = rng.standard_normal(x.shape)
    if noise is not None:
        noise = np.asarray(noise, dtype=float).reshape(x.shape)
    new, _ = _advance(x, spec, dt, noise, scheme)
    _guard(new, dt)
    new = new.reshape(np.shape(state.coeffs if is_field else state))
    return SpectralField(new) if is_field else new


def _guard(x, t):
    bad = ~(np.abs(x) <= BLOWUP_LIMIT)
    if bad.any():
        idx = np.argwhere(bad)[0]
        raise BlowUpError(int(idx[-1]) + 1, t, float(x[tuple(idx)]))


# ----------------------------------------------------------------------------
# batch engine


@dataclass
class _BatchResult:
    snapshots: np.ndarray          # (B, R, N)
    z_snapshots: np.ndarray | None
    blown: np.ndarray              # (B,)
    blowup_time: np.ndarray        # (B,) NaN if fine
    blowup_mode: np.ndarray        # (B,) 0 if fine


def _simulate_batch(x0: np.ndarray, spec: ModelSpec, params: SimParams,
                    seeds: Sequence[int]) -> _BatchResult:
    B, N = x0.shape
    sched = params.schedule()
    R = len(sched)
    snaps = np.full((B, R, N), np.nan)
    zsnaps = np.full((B, R, N), np.nan) if params.record_yz else None
    blown = np.zeros(B, bool)
    btime = np.full(B, np.nan)
    bmode = np.zeros(B, int)
    rngs = [_rng(s) for s in seeds] if params.noise_on else None

    x = x0.astype(float).copy()
    z = np.zeros_like(x) if params.record_yz else None
    t = 0.0
    n_blown = 0
    for r, (dt, n) in enumerate(sched):
        done = 0
        while done < n:
            m = min(_NOISE_BLOCK, n - done)
            block = (np.stack([g.standard_normal((m, N)) for g in rngs], axis=1)
                     if rngs is not None else None)
            for k in range(m):
                t += dt
                if n_blown == B:
                    break
                noise = block[k] if block is not None else None
                if n_blown:
                    alive = ~blown
                    xa, za = _advance(x[alive], spec, dt,
                                      None if noise is None else noise[alive], params.scheme,
                                      None if z is None else z[alive])
                else:
                    alive = slice(None)
                    xa, za = _advance(x, spec, dt, noise, params.scheme, z)
                ok = np.all(np.abs(xa) <= BLOWUP_LIMIT, axis=1)
                if not ok.all():
                    rows = np.arange(B)[alive][~ok]
                    blown[rows] = True
                    btime[rows] = t
                    for row, vals in zip(rows, xa[~ok]):
                        bad = np.flatnonzero(~(np.abs(vals) <= BLOWUP_LIMIT))
                        bmode[row] = int(bad[0]) + 1
                    xa[~ok] = np.nan
                    n_blown = int(blown.sum())
                x[alive] = xa
                if z is not None:
                    z[alive] = za
            done += m
        snaps[:, r] = x
        if zsnaps is not None:
            zsnaps[:, r] = z
    return _BatchResult(snaps, zsnaps, blown, btime, bmode)


# ----------------------------------------------------------------------------
# public drivers


@dataclass
class Trajectory:
    times: np.ndarray
    states: np.ndarray             # (R, N)
    z: np.ndarray | None = None    # stochastic convolution part, if recorded

    @property
    def y(self) -> np.ndarray | None:
        return None if self.z is None else self.states - self.z


def _as_batch(x0s, spec) -> np.ndarray:
    arr = np.array([np.asarray(x.coeffs if isinstance(x, SpectralField) else x, float)
                    for x in x0s])
    if arr.ndim != 2 or arr.shape[1] != spec.n_modes:
        raise ValueError(f"initial states must have {spec.n_modes} coefficients")
    return arr


def simulate_trajectory(x0, spec: ModelSpec, params: SimParams, *,
                        x0_index: int = 0, traj_index: int = 0) -> Trajectory:
    """Single path; identical to trajectory ``traj_index`` of group ``x0_index``
    in :func:`run_ensemble` with the same seed."""
    batch = _as_batch([x0], spec)
    res = _simulate_batch(batch, spec, params, [child_seed(params.seed, x0_index, traj_index)])
    if res.blown[0]:
        raise BlowUpError(int(res.blowup_mode[0]), float(res.blowup_time[0]), math.inf)
    return Trajectory(np.array(params.record_times), res.snapshots[0],
                      None if res.z_snapshots is None else res.z_snapshots[0])


@dataclass
class Ensemble:
    """Snapshots of ``n_traj`` trajectories for each initial state.

    ``snapshots`` has shape (n_x0, n_traj, n_times, N); blown-up trajectories
    hold NaN from their blow-up onward and are flagged in ``blown``.
    """

    spec: ModelSpec
    params: SimParams
    x0s: np.ndarray
    times: np.ndarray
    snapshots: np.ndarray
    blown: np.ndarray
    blowup_time: np.ndarray
    seeds: np.ndarray
    z_snapshots: np.ndarray | None = None
    x0_indices: tuple[int, ...] = ()

    @property
    def n_x0(self) -> int:
        return self.snapshots.shape[0]

    @property
    def n_traj(self) -> int:
        return self.snapshots.shape[1]

    @property
    def blowup_count(self) -> int:
        return int(self.blown.sum())

    @property
    def blowup_fraction(self) -> float:
        return self.blowup_count / self.blown.size

    def group(self, i: int) -> Ensemble:
        sl = slice(i, i + 1)
        return Ensemble(self.spec, self.params, self.x0s[sl], self.times,
                        self.snapshots[sl], self.blown[sl], self.blowup_time[sl],
                        self.seeds[sl],
                        None if self.z_snapshots is None else self.z_snapshots[sl],
                        (self.x0_indices[i],) if self.x0_indices else (i,))

    def states(self, time_index: int, include_blown: bool = False) -> np.ndarray:
        """All trajectories' coefficients at one record time, shape (K, N)."""
        s = self.snapshots[:, :, time_index].reshape(-1, self.snapshots.shape[-1])
        if include_blown:
            return s
        return s[~self.blown.reshape(-1)]

    def time_index(self, t: float) -> int:
        idx = int(np.argmin(np.abs(self.times - t)))
        if not math.isclose(self.times[idx], t, rel_tol=1e-9, abs_tol=1e-12):
            raise KeyError(f"time {t} is not a record time")
        return idx

    def manifest(self) -> dict:
        p = self.params
        return {
            "n_x0": self.n_x0,
            "n_traj": self.n_traj,
            "record_times": [float(t) for t in self.times],
            "seed": p.seed,
            "seed_scheme": "SeedSequence(seed, spawn_key=(x0_index, traj_index)) -> uint64 -> Philox",
            "dt": p.dt,
            "t_end": p.t_end,
            "noise_on": p.noise_on,
            "scheme": p.scheme,
            "blowup_count": self.blowup_count,
            "blowup_fraction": self.blowup_fraction,
            "x0s": self.x0s.tolist(),
        }

    def to_csv(self, path, digits: int = 17) -> None:
        """Rows ``traj_id, time, coeff_1..coeff_N``; traj_id = group * n_traj + i."""
        N = self.snapshots.shape[-1]
        fmt = f"{{:.{digits}g}}".format
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["traj_id", "time"] + [f"coeff_{n}" for n in range(1, N + 1)])
            for g in range(self.n_x0):
                for i in range(self.n_traj):
                    tid = g * self.n_traj + i
                    for r, t in enumerate(self.times):
                        w.writerow([tid, fmt(t)] + [fmt(v) for v in self.snapshots[g, i, r]])


def _thread_count(threads: int | None) -> int:
    if threads is not None:
        return max(1, int(threads))
    return max(1, int(os.environ.get(THREADS_ENV, "1")))


def run_ensemble(x0s, n_traj: int, spec: ModelSpec, params: SimParams, *,
                 chunk_size: int = 256, threads: int | None = None,
                 x0_indices: Sequence[int] | None = None) -> Ensemble:
    """Simulate ``n_traj`` trajectories from each initial state.

    Work is split into chunks of at most ``chunk_size`` trajectories, run on
    ``threads`` workers (default from the ``RDERGODIC_THREADS`` environment
    variable); chunking and thread count never change the numbers.
    ``x0_indices`` overrides the group index used in seed derivation.
    """
    if n_traj < 2:
        raise ValueError("n_traj must be at least 2 (use simulate_trajectory for one path)")
    X0 = _as_batch(x0s, spec)
    G = X0.shape[0]
    gidx = list(range(G)) if x0_indices is None else [int(i) for i in x0_indices]
    seeds = np.array([[child_seed(params.seed, gidx[g], i) for i in range(n_traj)]
                      for g in range(G)], dtype=np.uint64)
    tasks = []
    for g in range(G):
        for lo in range(0, n_traj, chunk_size):
            hi = min(n_traj, lo + chunk_size)
            tasks.append((g, lo, hi))

    def work(task):
        g, lo, hi = task
        batch = np.repeat(X0[g:g + 1], hi - lo, axis=0)
        return _simulate_batch(batch, spec, params, [int(s) for s in seeds[g, lo:hi]])

    nthreads = _thread_count(threads)
    if nthreads == 1:
        results = [work(t) for t in tasks]
    else:
        with ThreadPoolExecutor(nthreads) as ex:
            results = list(ex.map(work, tasks))

    R, N = len(params.record_times), spec.n_modes
    snaps = np.empty((G, n_traj, R, N))
    zsnaps = np.empty((G, n_traj, R, N)) if params.record_yz else None
    blown = np.zeros((G, n_traj), bool)
    btime = np.full((G, n_traj), np.nan)
    for (g, lo, hi), res in zip(tasks, results):
        snaps[g, lo:hi] = res.snapshots
        if zsnaps is not None:
            zsnaps[g, lo:hi] = res.z_snapshots
        blown[g, lo:hi] = res.blown
        btime[g, lo:hi] = res.blowup_time
    return Ensemble(spec, params, X0, np.array(params.record_times), snaps, blown, btime,
                    seeds, zsnaps, tuple(gidx))
