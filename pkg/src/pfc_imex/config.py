"""YAML run configuration: parsing, defaults, validation and echo.

Layout (every section except ``grid``, ``time`` and ``tableau`` is optional)::

    grid:       {dims: [128, 128], lengths: [128.0, 128.0]}
    model:      {epsilon: 0.025, a: 0.001, alpha: 0.0, beta: 1.0, r: 0.0,
                 m0: auto, m0_safety: 10.0}
    time:       {tau: 0.1, t_final: 100.0}
    tableau:    imex43            # shipped name or path to a tableau file
    experiment: {kind: random2d, seed: 0, options: {base: 0.06, amp: 0.01}}
    output:     {directory: run, snapshot_every: 0, diagnostics_every: 1}
    flags:      {strict: false, dealias: false, threads: 1}
    converge:   {taus: [0.0625, ...], a_values: [1.0, 0.001]}
    sweep:      [{alpha: 0.0, beta: 1.0, tau: 0.5}, ...]
"""

from __future__ import annotations

import copy
import math
import os
from dataclasses import dataclass, field
from pathlib import Path

import yaml

from . import model
from .errors import ConfigurationError
from .harness import EXPERIMENT_KINDS
from .spectral import make_grid

_MODEL_DEFAULTS = {"epsilon": 0.025, "a": 0.001, "alpha": 0.0, "beta": 1.0, "r": 0.0,
                   "m0": "auto", "m0_safety": 10.0}
_OUTPUT_DEFAULTS = {"directory": "run", "snapshot_every": 0, "diagnostics_every": 1}
_FLAG_DEFAULTS = {"strict": False, "dealias": False, "threads": 1}
_SECTIONS = {
    "grid": {"dims", "lengths"},
    "model": set(_MODEL_DEFAULTS),
    "time": {"tau", "t_final"},
    "tableau": None,
    "experiment": {"kind", "seed", "options"},
    "output": set(_OUTPUT_DEFAULTS),
    "flags": set(_FLAG_DEFAULTS),
    "converge": {"taus", "a_values"},
    "sweep": None,
}
_REQUIRED = ("grid", "time", "tableau")
_OPTION_KEYS = {"base", "amp", "psi0", "circumradius", "phibar", "capc", "p", "patches"}
DEFAULT_TAUS = [2.0**-k for k in range(4, 9)]


@dataclass
class RunConfig:
    dims: list
    lengths: list
    model: dict
    tau: float
    t_final: float
    tableau: str
    experiment: dict
    output: dict
    flags: dict
    converge: dict = field(default_factory=dict)
    sweep: list = field(default_factory=list)

    def grid(self):
        return make_grid(self.dims, self.lengths, workers=self.threads)

    @property
    def threads(self) -> int:
        n = int(self.flags["threads"])
        cap = os.environ.get("PFC_THREADS")
        if cap:
            try:
                n = min(n, int(cap))
            except ValueError:
                raise ConfigurationError(f"PFC_THREADS must be an integer, got {cap!r}") from None
        return max(n, 1)

    @property
    def m0_resolved(self) -> bool:
        return self.model["m0"] != "auto"

    def params(self, m0: float | None = None) -> model.ModelParams:
        m = self.model
        if m0 is None:
            if not self.m0_resolved:
                raise ConfigurationError("model.m0 is 'auto'; resolve it against the initial field first")
            m0 = m["m0"]
        return model.ModelParams(epsilon=m["epsilon"], a=m["a"], alpha=m["alpha"],
                                 beta=m["beta"], r=m["r"], m0=float(m0))

    def resolve_m0(self, phi0) -> "RunConfig":
        """Copy with ``model.m0`` fixed to a number (applying the auto rule if needed)."""
        out = copy.deepcopy(self)
        if not self.m0_resolved:
            out.model["m0"] = model.default_m0(phi0, self.model["m0_safety"])
        return out

    def to_dict(self) -> dict:
        d = {
            "grid": {"dims": list(self.dims), "lengths": list(self.lengths)},
            "model": dict(self.model),
            "time": {"tau": self.tau, "t_final": self.t_final},
            "tableau": self.tableau,
            "experiment": copy.deepcopy(self.experiment),
            "output": dict(self.output),
            "flags": dict(self.flags),
        }
        if isinstance(d["model"]["m0"], float) and math.isinf(d["model"]["m0"]):
            d["model"]["m0"] = "inf"
        if self.converge:
            d["converge"] = copy.deepcopy(self.converge)
        if self.sweep:
            d["sweep"] = copy.deepcopy(self.sweep)
        return d

    def dump(self) -> str:
        return yaml.safe_dump(self.to_dict(), sort_keys=False)


def _number(value, key, positive=False, nonnegative=False, integer=False):
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigurationError(f"{key} must be a number, got {value!r}")
    if integer and int(value) != value:
        raise ConfigurationError(f"{key} must be an integer, got {value!r}")
    value = int(value) if integer else float(value)
    if not math.isfinite(value):
        raise ConfigurationError(f"{key} must be finite, got {value!r}")
    if positive and not value > 0:
        raise ConfigurationError(f"{key} must be positive, got {value!r}")
    if nonnegative and value < 0:
        raise ConfigurationError(f"{key} must be nonnegative, got {value!r}")
    return value


def _check_keys(section: dict, allowed: set, prefix: str):
    if not isinstance(section, dict):
        raise ConfigurationError(f"{prefix} must be a mapping")
    for key in section:
        if key not in allowed:
            raise ConfigurationError(f"unknown config key '{prefix}.{key}'")


def config_from_dict(raw: dict, base_dir: Path | None = None) -> RunConfig:
    if not isinstance(raw, dict):
        raise ConfigurationError("config must be a mapping at the top level")
    for key in raw:
        if key not in _SECTIONS:
            raise ConfigurationError(f"unknown config key '{key}'")
    for key in _REQUIRED:
        if key not in raw:
            raise ConfigurationError(f"missing required config section '{key}'")

    g = raw["grid"]
    _check_keys(g, _SECTIONS["grid"], "grid")
    if "dims" not in g or "lengths" not in g:
        raise ConfigurationError("grid needs both 'dims' and 'lengths'")
    dims = [_number(n, "grid.dims", positive=True, integer=True) for n in g["dims"]]
    lengths = [_number(L, "grid.lengths", positive=True) for L in g["lengths"]]
    make_grid(dims, lengths)

    m = dict(_MODEL_DEFAULTS)
    _check_keys(raw.get("model", {}), _SECTIONS["model"], "model")
    m.update(raw.get("model", {}))
    for key in ("epsilon", "a", "alpha", "beta", "r"):
        m[key] = _number(m[key], f"model.{key}")
    m["m0_safety"] = _number(m["m0_safety"], "model.m0_safety", positive=True)
    if m["m0"] in ("inf", "Infinity"):
        m["m0"] = math.inf
    elif m["m0"] != "auto":
        m["m0"] = _number(m["m0"], "model.m0", positive=True)
    try:
        model.ModelParams(epsilon=m["epsilon"], a=m["a"], alpha=m["alpha"], beta=m["beta"],
                          r=m["r"], m0=1.0 if m["m0"] == "auto" else m["m0"])
    except ConfigurationError as exc:
        raise ConfigurationError(f"model: {exc}") from None

    t = raw["time"]
    _check_keys(t, _SECTIONS["time"], "time")
    if "tau" not in t or "t_final" not in t:
        raise ConfigurationError("time needs both 'tau' and 't_final'")
    tau = _number(t["tau"], "time.tau", positive=True)
    t_final = _number(t["t_final"], "time.t_final", nonnegative=True)

    tableau = raw["tableau"]
    if not isinstance(tableau, str):
        raise ConfigurationError("tableau must be a shipped name or a file path")
    from .tableau import SHIPPED
    if tableau not in SHIPPED and base_dir is not None and not Path(tableau).is_absolute():
        candidate = base_dir / tableau
        if candidate.exists():
            tableau = str(candidate)

    exp = dict(raw.get("experiment", {}))
    _check_keys(exp, _SECTIONS["experiment"], "experiment")
    if "kind" not in exp:
        if len(dims) == 2:
            exp["kind"] = "random2d"
        elif len(dims) == 3:
            exp["kind"] = "random3d"
        else:
            raise ConfigurationError("experiment.kind is required for 1D grids")
    if exp["kind"] not in EXPERIMENT_KINDS:
        raise ConfigurationError(f"experiment.kind must be one of {EXPERIMENT_KINDS}, got {exp['kind']!r}")
    exp["seed"] = _number(exp.get("seed", 0), "experiment.seed", nonnegative=True, integer=True)
    exp["options"] = dict(exp.get("options", {}) or {})
    _check_keys(exp["options"], _OPTION_KEYS, "experiment.options")

    out = dict(_OUTPUT_DEFAULTS)
    _check_keys(raw.get("output", {}), _SECTIONS["output"], "output")
    out.update(raw.get("output", {}))
    out["directory"] = str(out["directory"])
    out["snapshot_every"] = _number(out["snapshot_every"], "output.snapshot_every", nonnegative=True, integer=True)
    out["diagnostics_every"] = _number(out["diagnostics_every"], "output.diagnostics_every", positive=True, integer=True)

    flags = dict(_FLAG_DEFAULTS)
    _check_keys(raw.get("flags", {}), _SECTIONS["flags"], "flags")
    flags.update(raw.get("flags", {}))
    for key in ("strict", "dealias"):
        if not isinstance(flags[key], bool):
            raise ConfigurationError(f"flags.{key} must be true or false")
    flags["threads"] = _number(flags["threads"], "flags.threads", positive=True, integer=True)

    conv = dict(raw.get("converge", {}) or {})
    _check_keys(conv, _SECTIONS["converge"], "converge")
    if conv:
        if "taus" in conv:
            conv["taus"] = [_number(x, "converge.taus", positive=True) for x in conv["taus"]]
        if "a_values" in conv:
            conv["a_values"] = [_number(x, "converge.a_values", nonnegative=True) for x in conv["a_values"]]

    sweep = []
    for i, combo in enumerate(raw.get("sweep", []) or []):
        _check_keys(combo, {"alpha", "beta", "tau"}, f"sweep[{i}]")
        sweep.append({
            "alpha": _number(combo.get("alpha", m["alpha"]), f"sweep[{i}].alpha"),
            "beta": _number(combo.get("beta", m["beta"]), f"sweep[{i}].beta"),
            "tau": _number(combo.get("tau", tau), f"sweep[{i}].tau", positive=True),
        })

    return RunConfig(dims=dims, lengths=lengths, model=m, tau=tau, t_final=t_final,
                     tableau=tableau, experiment=exp, output=out, flags=flags,
                     converge=conv, sweep=sweep)


def parse_config_text(text: str, base_dir: Path | None = None) -> RunConfig:
    try:
        raw = yaml.safe_load(text)
    except yaml.MarkedYAMLError as exc:
        mark = exc.problem_mark
        where = f"line {mark.line + 1}, column {mark.column + 1}: " if mark is not None else ""
        raise ConfigurationError(f"config parse error at {where}{exc.problem}") from None
    except yaml.YAMLError as exc:
        raise ConfigurationError(f"config parse error: {exc}") from None
    return config_from_dict(raw, base_dir)


def parse_config(path) -> RunConfig:
    path = Path(path)
    if not path.exists():
        raise ConfigurationError(f"config file {path} does not exist")
    return parse_config_text(path.read_text(), base_dir=path.parent)
