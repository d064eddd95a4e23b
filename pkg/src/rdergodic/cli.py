"""Command-line front end: one experiment per invocation.

``rdergodic <experiment> [--config PATH] [--seed INT] [--out DIR]``

Each run writes ``<out>/<experiment>/`` containing ``manifest.json`` (config
snapshot, seed scheme, library versions), ``summary.json`` and CSV curves.
The exit status is 0 iff every verdict the experiment produces passed and no
trajectory blew up.  ``report`` bundles earlier summaries under ``<out>``
without simulating.  The worker thread count comes from the
``RDERGODIC_THREADS`` environment variable and never changes results.
"""

from __future__ import annotations

import argparse
import json
import math
import platform
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .config import EXPERIMENTS, ConfigError, RunConfig, emit_config, load_config, parse_config
from .ergolab import (
    CompactSetSpec,
    DoeblinCertificate,
    chain_tv,
    default_stress_set,
    doeblin_constants,
    doeblin_mass,
    fit_tv_decay,
    minorization_probe,
    moment_curve,
    stationary_gap,
    tv_lower,
    uniform_moment_bound,
    uniformity_sweep,
    _write_columns,
)
from .hypotheses import CheckParams, check_all, check_drift_dissipativity
from .model import sup_norm
from .sim import run_ensemble, simulate_trajectory

__all__ = ["RunResult", "validate", "run", "main", "build_parser", "format_verdicts"]


@dataclass
class RunResult:
    status: int
    directory: Path
    summary: dict = field(default_factory=dict)


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        return x if math.isfinite(x) else str(x)
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    return obj


def _dump(path: Path, data) -> None:
    path.write_text(json.dumps(_jsonable(data), indent=2, sort_keys=True) + "\n")


def _versions() -> dict:
    import numba
    import scipy

    return {"rdergodic": __version__, "python": platform.python_version(),
            "numpy": np.__version__, "scipy": scipy.__version__, "numba": numba.__version__}


def _projection(text: str):
    return "sup" if text == "sup" else int(text)


def _x0s(cfg: RunConfig, mags):
    return [cfg.model.mode_field(cfg.options.mode, m) for m in mags]


# ----------------------------------------------------------------------------
# experiments; each returns (passed, summary) and writes its CSVs into ``out``


def _exp_check(cfg: RunConfig, out: Path):
    o = cfg.options
    params = CheckParams(epsilon=o.epsilon, s=o.s, alpha_exp=o.alpha_exp, T=o.horizon,
                         gamma_series=o.gamma_series, d=o.d, box=o.box,
                         grid_steps=o.grid_steps, quad_points=o.quad_points)
    entries = check_all(cfg.model, params)
    rows = [e.to_dict() for e in entries]
    passed = all(e.verdict is not None and e.verdict.passed for e in entries)
    return passed, {"verdicts": rows}


def _exp_simulate(cfg: RunConfig, out: Path):
    o = cfg.options
    ens = run_ensemble(_x0s(cfg, o.magnitudes), o.n_traj, cfg.model, cfg.sim)
    ens.to_csv(out / "snapshots.csv")
    _dump(out / "ensemble.json", ens.manifest())
    return ens.blowup_count == 0, {"blowup_count": ens.blowup_count,
                                   "n_trajectories": int(ens.blown.size)}


def _exp_moments(cfg: RunConfig, out: Path):
    o = cfg.options
    sim = cfg.sim.replace(record_yz=True)
    ens = run_ensemble(_x0s(cfg, o.magnitudes), o.n_traj, cfg.model, sim)
    diss = check_drift_dissipativity(cfg.model.drift, o.epsilon, o.s, o.box, o.grid_steps)
    cols = {"time": ens.times}
    z_sup, z_pow_sup = 0.0, 0.0
    for g, m in enumerate(o.magnitudes):
        grp = ens.group(g)
        x = moment_curve(grp, min_traj=2)
        z = moment_curve(grp, part="z", min_traj=2)
        zs = moment_curve(grp, part="z", power=o.s, min_traj=2)
        cols[f"mean_sup_x_m{g}"] = x.values
        cols[f"stderr_x_m{g}"] = x.errors
        cols[f"mean_sup_z_m{g}"] = z.values
        z_sup = max(z_sup, float(z.values.max()))
        z_pow_sup = max(z_pow_sup, float(zs.values.max()))
    _write_columns(out / "moments.csv", cols)
    summary = {"magnitudes": list(o.magnitudes), "blowup_count": ens.blowup_count,
               "dissipativity": diss.to_dict(), "sup_mean_z": z_sup}
    passed = ens.blowup_count == 0 and diss.passed
    late = ens.times >= 1.0
    if diss.passed and late.any():
        k = diss.witness
        c_hat = k.c2 * z_pow_sup + k.c3
        bound = uniform_moment_bound(k.c1, k.epsilon, c_hat) + z_sup
        ok = []
        for g in range(len(o.magnitudes)):
            x = moment_curve(ens.group(g), min_traj=2)
            ok.append(bool(np.all(x.values[late] <= bound + 3 * x.errors[late])))
        summary.update({"C_hat": c_hat, "bound": bound, "below_bound": ok})
        passed = passed and all(ok)
    return passed, summary


def _exp_tv(cfg: RunConfig, out: Path):
    o = cfg.options
    ens = run_ensemble(_x0s(cfg, [o.x0_a, o.x0_b]), o.n_traj, cfg.model, cfg.sim)
    curve = tv_lower(ens.group(0), ens.group(1), _projection(o.projection), o.bins)
    curve.to_csv(out / "tv.csv", "tv", "mc_error",
                 {"sparse_bins": curve.meta["sparse_bins"]})
    summary = {"blowup_count": ens.blowup_count, "underpopulated": curve.meta["underpopulated"]}
    try:
        summary["fit"] = fit_tv_decay(curve, snr=o.fit_snr, t_min=o.fit_t_min).to_dict()
    except ValueError as exc:
        summary["fit"] = None
        summary["fit_error"] = str(exc)
    return ens.blowup_count == 0, summary


def _exp_uniformity(cfg: RunConfig, out: Path):
    o = cfg.options
    sweep = uniformity_sweep(cfg.model, o.magnitudes, o.eps_level, cfg.sim, n_traj=o.n_traj,
                             projection=_projection(o.projection), bins=o.bins, mode=o.mode)
    sweep.to_csv(out / "uniformity.csv")
    cols = {}
    for m, c in zip(sweep.magnitudes, sweep.curves):
        if c is not None:
            cols.setdefault("time", c.times)
            cols[f"tv_m{m:g}"] = c.values
    if cols:
        _write_columns(out / "uniformity_curves.csv", cols)
    return sweep.blowup_count == 0, {
        "magnitudes": sweep.magnitudes, "times": sweep.times, "blowup_count": sweep.blowup_count,
                  "censored": sweep.censored, "spread": sweep.spread(),
                  "increasing": sweep.is_increasing(), "level": o.eps_level}


def _exp_minorize(cfg: RunConfig, out: Path):
    o = cfg.options
    K = CompactSetSpec(o.sup_radius, o.sobolev_theta, o.sobolev_radius)
    stress = default_stress_set(cfg.model, o.stress_magnitudes, o.rough)
    res = minorization_probe(cfg.model, stress, K, o.t_probe, o.n_traj, params=cfg.sim,
                             confidence=o.confidence)
    _write_columns(out / "minorization.csv", {
        "stress_index": list(range(len(stress))),
        "sup_norm_x0": [float(sup_norm(x.coeffs, cfg.model)) for x in stress],
        "hits": res.hits,
        "frequency": res.frequencies,
        "blown": res.blown,
    })
    passed = res.kappa_hat > 0 and res.wilson_lower > 0 and sum(res.blown) == 0
    return passed, res.to_dict()


def _exp_gap(cfg: RunConfig, out: Path):
    o = cfg.options
    s = cfg.sim
    n = int(math.floor(s.t_end / o.sample_interval + 1e-9))
    times = tuple(o.sample_interval * (i + 1) for i in range(n))
    path = simulate_trajectory(cfg.model.zero_field(), cfg.model,
                               s.replace(record_times=times, t_end=times[-1]))
    est = stationary_gap(path, _projection(o.projection), spec=cfg.model, burn_in=o.burn_in,
                         gamma_prelim=o.gamma_prelim, acf_floor=o.acf_floor,
                         assume_reversible=o.assume_reversible)
    _write_columns(out / "acf.csv", {"lag": est.lags, "acf": est.acf})
    return True, est.to_dict()


def _exp_doeblin(cfg: RunConfig, out: Path):
    o = cfg.options
    cert = DoeblinCertificate(o.T_steps, o.m0)
    C, gamma = doeblin_constants(cert)
    # synthetic two-state chain whose Doeblin mass is exactly m0
    q = 1 - o.m0
    P = np.array([[1 - q / 2, q / 2], [q / 2, 1 - q / 2]])
    mass = doeblin_mass(P)
    tv = chain_tv(P, [1.0, 0.0], [0.0, 1.0], o.chain_steps)
    bound = (1 - mass) ** np.arange(tv.size) * tv[0]
    _write_columns(out / "doeblin_chain.csv", {"n": np.arange(tv.size), "tv": tv, "bound": bound})
    ok = bool(np.all(tv <= bound * (1 + 1e-12)))
    return ok, {"C": C, "gamma_rate": gamma, "q": cert.q, "chain_mass": mass,
                "contraction_holds": ok}


def _exp_report(cfg: RunConfig, out: Path):
    root = out.parent
    parts = {}
    for summary in sorted(root.glob("*/summary.json")):
        name = summary.parent.name
        if name == "report":
            continue
        parts[name] = json.loads(summary.read_text())
    if "check" not in parts:
        ok, chk = _exp_check(cfg, out)
        parts["check"] = {"experiment": "check", "passed": ok, "result": chk, "composed": True}
    passed = all(p.get("passed", False) for p in parts.values())
    return passed, {"experiments": parts}


_RUNNERS = {
    "check": _exp_check,
    "simulate": _exp_simulate,
    "moments": _exp_moments,
    "tv": _exp_tv,
    "uniformity": _exp_uniformity,
    "minorize": _exp_minorize,
    "gap": _exp_gap,
    "doeblin": _exp_doeblin,
    "report": _exp_report,
}


def validate(config: RunConfig) -> None:
    """Cross-field checks that must fail before anything is simulated or written."""
    o = config.options
    if config.experiment == "tv" and o.record_times_b is not None and (
            len(o.record_times_b) != len(config.sim.record_times)
            or not np.allclose(o.record_times_b, config.sim.record_times, rtol=1e-12, atol=0)):
        raise ConfigError("record times of the two ensembles differ", "experiment.record_times_b")
    if config.experiment == "gap" and config.sim.t_end < 100 * config.sim.dt:
        raise ConfigError("path too short for an autocorrelation estimate", "sim.t_end")


def run(config: RunConfig) -> RunResult:
    """Execute one experiment and write its artifacts.

    Validation errors (:class:`ConfigError`) propagate before anything runs;
    other failures are recorded in the summary's ``error`` section.
    """
    validate(config)
    out = Path(config.output_dir) / config.experiment
    out.mkdir(parents=True, exist_ok=True)
    (out / "config.ini").write_text(emit_config(config))
    _dump(out / "manifest.json", {
        "experiment": config.experiment,
        "seed": config.seed,
        "seed_scheme": "SeedSequence(seed, spawn_key=(x0_index, traj_index)) -> uint64 -> Philox",
        "config": emit_config(config),
        "versions": _versions(),
    })
    try:
        passed, result = _RUNNERS[config.experiment](config, out)
        summary = {"experiment": config.experiment, "passed": bool(passed), "result": result}
    except ConfigError:
        raise
    except Exception as exc:  # partial failure: keep what completed
        passed = False
        summary = {"experiment": config.experiment, "passed": False,
                   "error": f"{type(exc).__name__}: {exc}"}
    _dump(out / "summary.json", summary)
    return RunResult(0 if passed else 1, out, summary)


def format_verdicts(rows) -> str:
    """Plain-text table of ``check`` verdicts."""
    head = ("hypothesis", "checker", "verdict", "margin")
    body = []
    for r in rows:
        margin = r.get("margin")
        verdict = "error" if r.get("error") else ("pass" if r["passed"] else "FAIL")
        body.append((r["hypothesis"], r["checker"], verdict,
                     "-" if margin is None else f"{margin:.4g}"))
    widths = [max(len(row[i]) for row in [head, *body]) for i in range(4)]
    lines = ["  ".join(c.ljust(w) for c, w in zip(row, widths)).rstrip() for row in [head, *body]]
    return "\n".join(lines)


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="rdergodic", description=__doc__.split("\n\n")[0])
    p.add_argument("experiment", choices=EXPERIMENTS)
    p.add_argument("--config", help="config file ([model], [sim], [experiment] sections)")
    p.add_argument("--seed", type=int, help="override the config seed")
    p.add_argument("--out", help="output directory (overrides experiment.output_dir)")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config) if args.config else parse_config("")
        changes = {"experiment": args.experiment}
        if args.seed is not None:
            changes["seed"] = args.seed
        if args.out is not None:
            changes["output_dir"] = args.out
        cfg = cfg.replace(**changes)
        result = run(cfg)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    if cfg.experiment == "check" and "result" in result.summary:
        print(format_verdicts(result.summary["result"]["verdicts"]))
    status = "passed" if result.status == 0 else "FAILED"
    print(f"{cfg.experiment}: {status} -> {result.directory}")
    if "error" in result.summary:
        print(result.summary["error"], file=sys.stderr)
    return result.status


if __name__ == "__main__":
    sys.exit(main())
