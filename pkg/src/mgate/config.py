"""Run configuration: INI or JSON files resolved to rad/µs and µs.

Example::

    [scheme]
    units = gamma_units      ; gamma_units | rad_per_us | MHz_times_2pi
    gamma_MHz = 6            ; reference linewidth gamma = 2 pi * gamma_MHz
    delta1 = 15
    delta3 = 15
    eps12 = 0.01             ; or delta2 = ...
    eps34 = 0.01             ; or delta4 = ...
    omega1 = 4
    omega4 = 4
    G_p = 22
    G_t = 22
    gamma = 1                ; all six channels; gamma12 ... gamma54 override

    [time]
    t_max = 1.2              ; in 1/gamma for gamma_units, else µs
    n_samples = 400

Values in ``gamma_units`` are multiples of gamma, in ``MHz_times_2pi`` they
are ordinary frequencies in MHz multiplied by 2 pi on load.
"""

from __future__ import annotations

import configparser
import dataclasses
import json
import math
from importlib import resources
from pathlib import Path

import numpy as np

from . import dynamics, model
from .errors import ConfigError, InvalidParamsError
from .metrics import MCOptions

UNITS = ("gamma_units", "rad_per_us", "MHz_times_2pi")
TIME_UNITS = ("gamma_units", "us")
CHANNEL_KEYS = {f"gamma{k}{l}": (k, l) for (l, k) in model.DECAY_CHANNELS}
RATE_FIELDS = ("delta1", "delta2", "delta3", "delta4", "eps12", "eps34", "omega1", "omega4", "G_p", "G_t")
SCHEME_KEYS = {"units", "gamma_MHz", "gamma", *RATE_FIELDS, *CHANNEL_KEYS}
SECTION_KEYS = {
    "scheme": SCHEME_KEYS,
    "time": {"t_max", "n_samples", "units"},
    "solver": {"method", "rtol", "atol", "max_step"},
    "mc": {"n_samples", "seed", "method", "quadrature_order"},
    "output": {"csv", "svg", "trajectory", "trajectory_indices"},
    "sweep": {"parameter", "start", "stop", "count", "scale", "metrics", "record_at"},
}
SWEEP_METRICS = ("phi01", "phi10", "phi11", "cps", "cps_unwrapped", "fid_det", "fid_cond",
                 "p_success", "leakage", "pop1", "pop2", "pop3", "pop4", "pop5")


@dataclasses.dataclass(frozen=True)
class SweepSpec:
    parameters: tuple
    values: np.ndarray
    metrics: tuple = ("cps_unwrapped", "fid_det", "fid_cond", "p_success")
    record_at: float | str = "cps-crossing-pi"

    @property
    def name(self) -> str:
        return ",".join(self.parameters)


@dataclasses.dataclass(frozen=True)
class RunConfig:
    scheme: dict
    params: model.SchemeParams
    gamma_ref: float
    times: np.ndarray
    solver: dynamics.SolverOptions
    mc: MCOptions
    output: dict
    sweep: SweepSpec | None = None
    source: str = ""

    @property
    def time_scale(self) -> float:
        """µs per configured time unit."""
        return 1.0 / self.gamma_ref if self.scheme.get("_time_units") == "gamma_units" else 1.0

    def params_with(self, **scheme_values) -> model.SchemeParams:
        """SchemeParams with some scheme entries replaced (config units)."""
        raw = dict(self.scheme)
        for key, value in scheme_values.items():
            raw[key] = value
            twin = {"eps12": "delta2", "delta2": "eps12", "eps34": "delta4", "delta4": "eps34"}.get(key)
            raw.pop(twin, None)
            if key == "gamma":
                for ck in CHANNEL_KEYS:
                    raw.pop(ck, None)
        return resolve_scheme(raw)[0]


def _float(section, key, value):
    try:
        x = float(value)
    except (TypeError, ValueError):
        raise ConfigError(f"[{section}] {key}: expected a number, got {value!r}") from None
    if not math.isfinite(x):
        raise ConfigError(f"[{section}] {key}: must be finite")
    return x


def _int(section, key, value):
    x = _float(section, key, value)
    if x != int(x):
        raise ConfigError(f"[{section}] {key}: expected an integer, got {value!r}")
    return int(x)


def _bool(section, key, value):
    if isinstance(value, bool):
        return value
    s = str(value).strip().lower()
    if s in ("1", "true", "yes", "on"):
        return True
    if s in ("0", "false", "no", "off"):
        return False
    raise ConfigError(f"[{section}] {key}: expected a boolean, got {value!r}")


def resolve_scheme(raw: dict):
    """``(SchemeParams, gamma_ref)`` from a raw ``[scheme]`` mapping."""
    units = raw.get("units")
    if units is None:
        raise ConfigError("[scheme] units is mandatory (gamma_units | rad_per_us | MHz_times_2pi)")
    if units not in UNITS:
        raise ConfigError(f"[scheme] units: unknown unit {units!r}; choose from {UNITS}")
    gamma_mhz = _float("scheme", "gamma_MHz", raw.get("gamma_MHz", 6.0))
    if gamma_mhz <= 0:
        raise ConfigError("[scheme] gamma_MHz must be positive")
    gamma_ref = 2 * math.pi * gamma_mhz
    factor = {"gamma_units": gamma_ref, "rad_per_us": 1.0, "MHz_times_2pi": 2 * math.pi}[units]
    vals = {k: _float("scheme", k, raw[k]) * factor for k in RATE_FIELDS if k in raw}
    for a, b in (("delta2", "eps12"), ("delta4", "eps34")):
        if a in vals and b in vals:
            raise ConfigError(f"[scheme] give either {a} or {b}, not both")
    missing = [k for k in ("delta1", "delta3", "omega1", "omega4", "G_p", "G_t") if k not in vals]
    if "delta2" not in vals and "eps12" not in vals:
        missing.append("delta2|eps12")
    if "delta4" not in vals and "eps34" not in vals:
        missing.append("delta4|eps34")
    if missing:
        raise ConfigError(f"[scheme] missing keys: {', '.join(missing)}")
    delta2 = vals["delta2"] if "delta2" in vals else vals["delta1"] - vals["eps12"]
    delta4 = vals["delta4"] if "delta4" in vals else vals["delta3"] - vals["eps34"]
    base = _float("scheme", "gamma", raw["gamma"]) * factor if "gamma" in raw else gamma_ref
    gamma = {key: base for key in CHANNEL_KEYS.values()}
    for name, key in CHANNEL_KEYS.items():
        if name in raw:
            gamma[key] = _float("scheme", name, raw[name]) * factor
    try:
        params = model.SchemeParams(delta1=vals["delta1"], delta2=delta2, delta3=vals["delta3"],
                                    delta4=delta4, omega1=vals["omega1"], omega4=vals["omega4"],
                                    G_p=vals["G_p"], G_t=vals["G_t"], gamma=gamma)
    except InvalidParamsError as exc:
        raise ConfigError(f"[scheme] {exc}") from exc
    return params, gamma_ref


def _read_sections(path: Path) -> dict:
    text = path.read_text(encoding="utf-8")
    if path.suffix.lower() == ".json" or text.lstrip().startswith("{"):
        try:
            data = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: invalid JSON ({exc})") from exc
        if not isinstance(data, dict) or not all(isinstance(v, dict) for v in data.values()):
            raise ConfigError(f"{path}: JSON config must map section names to objects")
        return {s: dict(v) for s, v in data.items()}
    parser = configparser.ConfigParser(inline_comment_prefixes=(";", "#"), interpolation=None)
    parser.optionxform = str
    try:
        parser.read_string(text, source=str(path))
    except configparser.Error as exc:
        raise ConfigError(f"{path}: {exc}") from exc
    return {s: dict(parser[s]) for s in parser.sections()}


def bundled_configs():
    """Names of the configuration files shipped with the package."""
    root = resources.files("mgate") / "configs"
    return sorted(p.name for p in root.iterdir() if p.name.endswith(".cfg"))


def find_config(name) -> Path:
    """Resolve a path, or the name of a bundled config (with or without ``.cfg``)."""
    path = Path(name)
    if path.exists():
        return path
    root = resources.files("mgate") / "configs"
    for candidate in (path.name, path.name + ".cfg"):
        res = root / candidate
        if res.is_file():
            return Path(str(res))
    raise ConfigError(f"config {name!s} not found (bundled: {', '.join(bundled_configs())})")


def _parse_sweep(sec, scheme):
    if "parameter" not in sec:
        raise ConfigError("[sweep] parameter is required")
    names = tuple(p.strip() for p in str(sec["parameter"]).split(",") if p.strip())
    allowed = set(RATE_FIELDS) | {"gamma"} | set(CHANNEL_KEYS)
    for p in names:
        if p not in allowed:
            raise ConfigError(f"[sweep] parameter {p!r} is not a scheme parameter")
    start = _float("sweep", "start", sec.get("start"))
    stop = _float("sweep", "stop", sec.get("stop"))
    count = _int("sweep", "count", sec.get("count"))
    if count < 1:
        raise ConfigError("[sweep] count must be >= 1")
    scale = sec.get("scale", "linear")
    if scale == "linear":
        values = np.linspace(start, stop, count)
    elif scale == "log":
        if start <= 0 or stop <= 0:
            raise ConfigError("[sweep] log scale needs positive bounds")
        values = np.geomspace(start, stop, count)
    else:
        raise ConfigError(f"[sweep] scale must be linear or log, got {scale!r}")
    metrics = SweepSpec.metrics
    if "metrics" in sec:
        metrics = tuple(m.strip() for m in str(sec["metrics"]).split(",") if m.strip())
        bad = [m for m in metrics if m not in SWEEP_METRICS]
        if bad:
            raise ConfigError(f"[sweep] unknown metrics {bad}; choose from {SWEEP_METRICS}")
    record = sec.get("record_at", "cps-crossing-pi")
    if record != "cps-crossing-pi":
        record = _float("sweep", "record_at", record)
        if record <= 0:
            raise ConfigError("[sweep] record_at must be a positive time or cps-crossing-pi")
    return SweepSpec(names, values, metrics, record)


def load_config(name, seed: int | None = None) -> RunConfig:
    """Parse and validate a config file; ``seed`` overrides ``[mc] seed``."""
    path = find_config(name)
    sections = _read_sections(path)
    for sec, keys in sections.items():
        if sec not in SECTION_KEYS:
            raise ConfigError(f"unknown section [{sec}]")
        unknown = set(keys) - SECTION_KEYS[sec]
        if unknown:
            raise ConfigError(f"[{sec}] unknown keys: {', '.join(sorted(unknown))}")
    if "scheme" not in sections:
        raise ConfigError("missing [scheme] section")
    scheme = dict(sections["scheme"])
    params, gamma_ref = resolve_scheme(scheme)

    tsec = sections.get("time", {})
    t_units = tsec.get("units", "gamma_units" if scheme["units"] == "gamma_units" else "us")
    if t_units not in TIME_UNITS:
        raise ConfigError(f"[time] units must be one of {TIME_UNITS}")
    scheme["_time_units"] = t_units
    if "t_max" not in tsec:
        raise ConfigError("[time] t_max is required")
    t_max = _float("time", "t_max", tsec["t_max"])
    n = _int("time", "n_samples", tsec.get("n_samples", 200))
    if t_max <= 0:
        raise ConfigError("[time] t_max must be positive")
    if n < 2:
        raise ConfigError("[time] n_samples must be >= 2")
    scale = 1.0 / gamma_ref if t_units == "gamma_units" else 1.0
    times = np.linspace(0.0, t_max * scale, n)

    ssec = sections.get("solver", {})
    try:
        solver = dynamics.SolverOptions(
            method=ssec.get("method", "adaptive-rk"),
            rtol=_float("solver", "rtol", ssec.get("rtol", 1e-9)),
            atol=_float("solver", "atol", ssec.get("atol", 1e-12)),
            max_step=_float("solver", "max_step", ssec.get("max_step", math.inf)) * scale
            if "max_step" in ssec else math.inf,
        )
    except ValueError as exc:
        raise ConfigError(f"[solver] {exc}") from exc

    msec = sections.get("mc", {})
    try:
        mc = MCOptions(
            n_samples=_int("mc", "n_samples", msec.get("n_samples", 2000)),
            seed=seed if seed is not None else _int("mc", "seed", msec.get("seed", MCOptions.seed)),
            method=msec.get("method", "quadrature"),
            quadrature_order=_int("mc", "quadrature_order", msec.get("quadrature_order", 12)),
        )
    except ValueError as exc:
        raise ConfigError(f"[mc] {exc}") from exc

    osec = sections.get("output", {})
    output = {
        "csv": osec.get("csv", "metrics.csv"),
        "svg": _bool("output", "svg", osec.get("svg", False)),
        "trajectory": _bool("output", "trajectory", osec.get("trajectory", False)),
        "trajectory_indices": None,
    }
    if "trajectory_indices" in osec:
        raw = osec["trajectory_indices"]
        items = raw if isinstance(raw, list) else str(raw).split(",")
        idx = [_int("output", "trajectory_indices", i) for i in items if str(i).strip()]
        if any(i < 0 or i >= 18 for i in idx):
            raise ConfigError("[output] trajectory_indices must lie in 0..17")
        output["trajectory_indices"] = tuple(idx)

    sweep = _parse_sweep(sections["sweep"], scheme) if "sweep" in sections else None
    if isinstance(sweep, SweepSpec) and isinstance(sweep.record_at, float):
        sweep = dataclasses.replace(sweep, record_at=sweep.record_at * scale)
    cfg = RunConfig(scheme=scheme, params=params, gamma_ref=gamma_ref, times=times, solver=solver,
                    mc=mc, output=output, sweep=sweep, source=str(path))
    if sweep is not None:
        for p in sweep.parameters:
            cfg.params_with(**{p: sweep.values[0]})
    return cfg
