"""Run configuration: a strict ``key = value`` document with ``[model]``,
``[sim]`` and ``[experiment]`` sections.

Every key has a default, so ``[experiment]\\nname = check`` is a complete
config.  Lists are comma separated; an empty value means "unset" for optional
keys.  :func:`emit_config` writes the canonical form (every key, fixed order,
round-trip exact floats) and ``parse_config(emit_config(c)) == c``.
"""

from __future__ import annotations

import configparser
from dataclasses import dataclass, field, fields, replace
from typing import Any, Callable

from .model import CovarianceSpec, DriftPolynomial, ModelSpec
from .sim import SimParams

__all__ = [
    "EXPERIMENTS",
    "ConfigError",
    "ExperimentOptions",
    "RunConfig",
    "parse_config",
    "emit_config",
    "load_config",
]

EXPERIMENTS = ("check", "simulate", "moments", "tv", "uniformity", "minorize", "gap",
               "doeblin", "report")


class ConfigError(ValueError):
    """Invalid configuration; ``key`` names the offending entry when known."""

    def __init__(self, message: str, key: str | None = None):
        self.key = key
        super().__init__(f"{key}: {message}" if key else message)


# ----------------------------------------------------------------------------
# value codecs


def _float(text: str) -> float:
    return float(text)


def _int(text: str) -> int:
    return int(text)


def _bool(text: str) -> bool:
    t = text.strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _floats(text: str) -> tuple[float, ...]:
    return tuple(float(p) for p in text.split(",") if p.strip())


def _opt(parse: Callable[[str], Any]) -> Callable[[str], Any]:
    return lambda text: None if not text.strip() else parse(text)


def _show(value) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    if isinstance(value, tuple):
        return ", ".join(_show(float(v)) for v in value)
    return str(value)


# ----------------------------------------------------------------------------
# schema

_MODEL_KEYS: dict[str, Callable[[str], Any]] = {
    "length": _float,
    "n_modes": _int,
    "n_colloc": _opt(_int),
    "drift": _floats,
    "covariance": str,
    "cov_scale": _float,
    "cov_exponent": _float,
    "cov_exponent_b": _opt(_float),
    "cov_values": _floats,
    "cov_tail_exponent": _opt(_float),
}

_SIM_KEYS: dict[str, Callable[[str], Any]] = {
    "dt": _float,
    "t_end": _float,
    "record_times": _opt(_floats),
    "noise_on": _bool,
    "scheme": str,
    "record_yz": _bool,
}


@dataclass(frozen=True)
class ExperimentOptions:
    """Experiment knobs; each experiment reads the ones it needs."""

    # ensembles
    n_traj: int = 500
    magnitudes: tuple[float, ...] = (0.0, 10.0, 100.0, 1000.0)
    mode: int = 1
    # hypothesis checks
    epsilon: float = 2.0
    s: float = 3.0
    alpha_exp: float = 0.25
    horizon: float = 1.0
    gamma_series: float = 0.25
    d: int = 1
    box: float = 10.0
    grid_steps: int = 2001
    quad_points: int = 16
    # total variation
    x0_a: float = 2.0
    x0_b: float = 0.0
    record_times_b: tuple[float, ...] | None = None
    projection: str = "1"
    bins: int = 64
    eps_level: float = 0.25
    fit_t_min: float = 0.5
    fit_snr: float = 1.5
    # small sets
    stress_magnitudes: tuple[float, ...] = (100.0, 10000.0)
    rough: bool = True
    sup_radius: float = 5.0
    sobolev_theta: float = 0.75
    sobolev_radius: float = 50.0
    t_probe: float = 2.0
    confidence: float = 0.95
    # autocorrelation gap
    burn_in: float | None = None
    gamma_prelim: float | None = None
    acf_floor: float = 0.2
    sample_interval: float = 0.05
    assume_reversible: bool = True
    # Doeblin arithmetic
    T_steps: float = 5.0
    m0: float = 0.5
    chain_steps: int = 10


_OPTION_CODECS: dict[str, Callable[[str], Any]] = {}
for _f in fields(ExperimentOptions):
    _default = _f.default
    if _f.name == "record_times_b":
        _OPTION_CODECS[_f.name] = _opt(_floats)
    elif _f.name in ("burn_in", "gamma_prelim"):
        _OPTION_CODECS[_f.name] = _opt(_float)
    elif isinstance(_default, bool):
        _OPTION_CODECS[_f.name] = _bool
    elif isinstance(_default, int):
        _OPTION_CODECS[_f.name] = _int
    elif isinstance(_default, float):
        _OPTION_CODECS[_f.name] = _float
    elif isinstance(_default, tuple):
        _OPTION_CODECS[_f.name] = _floats
    else:
        _OPTION_CODECS[_f.name] = str

_EXPERIMENT_KEYS = {"name": str, "output_dir": str, "seed": _int, **_OPTION_CODECS}


@dataclass(frozen=True)
class RunConfig:
    model: ModelSpec = field(default_factory=ModelSpec)
    sim: SimParams = field(default_factory=SimParams)
    experiment: str = "check"
    output_dir: str = "out"
    seed: int = 0
    options: ExperimentOptions = field(default_factory=ExperimentOptions)

    def __post_init__(self):
        if self.experiment not in EXPERIMENTS:
            raise ConfigError(f"unknown experiment {self.experiment!r}; choose from "
                              + ", ".join(EXPERIMENTS), "experiment.name")
        if self.sim.seed != self.seed:
            object.__setattr__(self, "sim", self.sim.replace(seed=self.seed))

    def replace(self, **changes) -> RunConfig:
        if "seed" in changes:
            changes.setdefault("sim", self.sim.replace(seed=changes["seed"]))
        return replace(self, **changes)


def _section(parser, name, schema) -> dict[str, Any]:
    out = {}
    if not parser.has_section(name):
        return out
    for key, text in parser.items(name):
        if key not in schema:
            raise ConfigError("unknown key", f"{name}.{key}")
        try:
            out[key] = schema[key](text)
        except ValueError as exc:
            raise ConfigError(str(exc), f"{name}.{key}") from None
    return out


def _build_model(values: dict[str, Any]) -> ModelSpec:
    kind = values.get("covariance", "identity")
    try:
        cov = CovarianceSpec(
            kind=kind,
            scale=values.get("cov_scale", 1.0),
            exponent=values.get("cov_exponent", 0.0),
            exponent_b=values.get("cov_exponent_b"),
            values=values.get("cov_values", ()),
            tail_exponent=values.get("cov_tail_exponent"),
        )
    except ValueError as exc:
        key = "model.cov_exponent_b" if "check_powerlaw_window" in str(exc) else "model.covariance"
        raise ConfigError(str(exc), key) from None
    try:
        drift = DriftPolynomial(values.get("drift", DriftPolynomial().coefficients))
    except ValueError as exc:
        raise ConfigError(str(exc), "model.drift") from None
    kwargs = {k: values[k] for k in ("length", "n_modes", "n_colloc") if k in values}
    try:
        return ModelSpec(drift=drift, covariance=cov, **kwargs)
    except ValueError as exc:
        raise ConfigError(str(exc), "model") from None


def parse_config(text: str) -> RunConfig:
    """Validate a config document; unknown sections or keys are errors."""
    parser = configparser.ConfigParser(interpolation=None, default_section="__none__")
    parser.optionxform = str
    try:
        parser.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(f"malformed config: {exc}") from None
    for sec in parser.sections():
        if sec not in ("model", "sim", "experiment"):
            raise ConfigError("unknown section", sec)
    model_vals = _section(parser, "model", _MODEL_KEYS)
    sim_vals = _section(parser, "sim", _SIM_KEYS)
    exp_vals = _section(parser, "experiment", _EXPERIMENT_KEYS)

    model = _build_model(model_vals)
    seed = exp_vals.pop("seed", 0)
    name = exp_vals.pop("name", "check")
    out_dir = exp_vals.pop("output_dir", "out")
    try:
        sim = SimParams(seed=seed, **sim_vals)
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc), "sim") from None
    opts = ExperimentOptions(**exp_vals)
    if opts.projection not in ("sup",) and not opts.projection.isdigit():
        raise ConfigError("projection must be a mode index or 'sup'", "experiment.projection")
    if not 0 < opts.eps_level < 1:
        raise ConfigError("must lie in (0, 1)", "experiment.eps_level")
    if opts.bins < 8:
        raise ConfigError("must be at least 8", "experiment.bins")
    if opts.n_traj < 2:
        raise ConfigError("must be at least 2", "experiment.n_traj")
    return RunConfig(model, sim, name, out_dir, seed, opts)


def load_config(path) -> RunConfig:
    with open(path) as fh:
        return parse_config(fh.read())


def emit_config(cfg: RunConfig) -> str:
    """Canonical text: every key in schema order, floats by ``repr``."""
    m, s = cfg.model, cfg.sim
    model = {
        "length": float(m.length),
        "n_modes": m.n_modes,
        "n_colloc": m.n_colloc,
        "drift": tuple(m.drift.coefficients),
        "covariance": m.covariance.kind,
        "cov_scale": float(m.covariance.scale),
        "cov_exponent": float(m.covariance.exponent),
        "cov_exponent_b": None if m.covariance.exponent_b is None else float(m.covariance.exponent_b),
        "cov_values": tuple(m.covariance.values),
        "cov_tail_exponent": (None if m.covariance.tail_exponent is None
                              else float(m.covariance.tail_exponent)),
    }
    sim = {
        "dt": float(s.dt),
        "t_end": float(s.t_end),
        "record_times": tuple(s.record_times),
        "noise_on": s.noise_on,
        "scheme": s.scheme,
        "record_yz": s.record_yz,
    }
    exp = {"name": cfg.experiment, "output_dir": cfg.output_dir, "seed": cfg.seed}
    for f in fields(ExperimentOptions):
        v = getattr(cfg.options, f.name)
        exp[f.name] = float(v) if isinstance(v, float) and not isinstance(v, bool) else v
    lines = []
    for title, vals in (("model", model), ("sim", sim), ("experiment", exp)):
        lines.append(f"[{title}]")
        lines += [f"{k} = {_show(v)}".rstrip() for k, v in vals.items()]
        lines.append("")
    return "\n".join(lines)
