"""Run-config loading and validation (YAML), with line numbers in error messages."""

from __future__ import annotations

import copy
import hashlib
import json
from dataclasses import dataclass

import yaml

SCHEMA_VERSION = "1.0"

SCENARIOS = (
    "condition-check",
    "norm-sandwich",
    "static-pinning",
    "static-membrane",
    "static-equivalence",
    "sde-invariance",
    "dynamic-equivalence",
    "increment-slope",
    "form-convergence",
    "spectral-table",
    "level-set",
    "envelopes",
)

ARCHETYPE_NAMES = ("tent-1d", "tent-2d", "indicator-cube-1d", "indicator-cube-2d", "indicator-lower-1d")
MODEL_KINDS = ("random-walk", "bridge", "membrane", "single-particle")
SAMPLER_METHODS = ("gaussian", "importance", "mcmc", "pinning", "auto")

# section -> key -> (type(s), required)
SCHEMA = {
    "": {
        "scenario": (str, True),
        "seed": (int, True),
        "workers": (int, False),
        "domain": (dict, False),
        "archetypes": (list, False),
        "model": (dict, False),
        "potential": (dict, False),
        "sampler": (dict, False),
        "sde": (dict, False),
        "analysis": (dict, False),
        "output": (dict, False),
    },
    "domain": {
        "dim": (int, True),
        "lower": (list, False),
        "upper": (list, False),
        "rule": (str, False),
        "margin": (int, False),
    },
    "model": {
        "kind": (str, True),
        "N": ((int, list), True),
        "alpha": ((str, int, float), False),
    },
    "potential": {
        "smooth": (str, False),
        "amplitude": ((int, float), False),
        "width": ((int, float), False),
        "levels": (list, False),
        "jumps": (list, False),
    },
    "sampler": {
        "method": (str, False),
        "count": (int, False),
        "burn_in": (int, False),
        "step_scale": ((int, float), False),
        "thin": (int, False),
        "chains": (int, False),
        "beta": ((int, float), False),
        "sweeps": (int, False),
    },
    "sde": {
        "dt": ((int, float), False),
        "T": ((int, float), False),
        "replicas": (int, False),
        "output_times": (list, False),
        "scheme": (str, False),
    },
    "output": {
        "dir": (str, False),
        "format": (str, False),
    },
}


class ConfigError(ValueError):
    def __init__(self, message: str, field: str = "", line: int | None = None):
        self.field = field
        self.line = line
        where = ""
        if field:
            where += f"field '{field}'"
        if line is not None:
            where += f" (line {line})"
        super().__init__(f"{where}: {message}" if where else message)


def _line_index(text: str) -> dict:
    """Map dotted key paths to 1-based line numbers using the YAML node tree."""
    index = {}
    try:
        root = yaml.compose(text)
    except yaml.YAMLError:
        return index

    def walk(node, prefix):
        if isinstance(node, yaml.MappingNode):
            for k, v in node.value:
                path = f"{prefix}.{k.value}" if prefix else str(k.value)
                index[path] = k.start_mark.line + 1
                walk(v, path)

    if root is not None:
        walk(root, "")
    return index


@dataclass
class RunConfig:
    data: dict
    source: str = ""

    @property
    def scenario(self) -> str:
        return self.data["scenario"]

    @property
    def seed(self) -> int:
        return int(self.data["seed"])

    @property
    def workers(self) -> int:
        return int(self.data.get("workers", 1))

    def section(self, name: str) -> dict:
        return dict(self.data.get(name) or {})

    @property
    def hash(self) -> str:
        """SHA-256 of the canonical JSON form of the config.

        The output location and worker count are left out: neither changes the data.
        """
        d = copy.deepcopy(self.data)
        d.pop("output", None)
        d.pop("workers", None)
        blob = json.dumps(d, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()


def _check_types(data: dict, lines: dict) -> None:
    for section, spec in SCHEMA.items():
        block = data if section == "" else data.get(section)
        if block is None:
            continue
        prefix = f"{section}." if section else ""
        if not isinstance(block, dict):
            raise ConfigError("must be a mapping", section, lines.get(section))
        for key, (types, required) in spec.items():
            if key not in block:
                if required:
                    raise ConfigError("missing required key", prefix + key, lines.get(section))
                continue
            val = block[key]
            if isinstance(val, bool) or not isinstance(val, types):
                tn = types.__name__ if isinstance(types, type) else "/".join(t.__name__ for t in types)
                raise ConfigError(f"expected {tn}, got {type(val).__name__}", prefix + key, lines.get(prefix + key))
        if section == "":
            continue
        for key in block:
            if key not in spec:
                raise ConfigError("unknown key", prefix + key, lines.get(prefix + key))


def validate(data, lines: dict | None = None) -> RunConfig:
    lines = lines or {}
    if not isinstance(data, dict):
        raise ConfigError("config must be a mapping at top level")
    _check_types(data, lines)
    if data["scenario"] not in SCENARIOS:
        raise ConfigError(f"unknown scenario; choose from {', '.join(SCENARIOS)}", "scenario", lines.get("scenario"))
    if data["seed"] < 0:
        raise ConfigError("seed must be non-negative", "seed", lines.get("seed"))
    if data.get("workers", 1) < 1:
        raise ConfigError("workers must be >= 1", "workers", lines.get("workers"))
    for name in data.get("archetypes", []) or []:
        if name not in ARCHETYPE_NAMES:
            raise ConfigError(f"unknown archetype {name!r}; choose from {', '.join(ARCHETYPE_NAMES)}", "archetypes", lines.get("archetypes"))
    model = data.get("model")
    if model:
        if model["kind"] not in MODEL_KINDS:
            raise ConfigError(f"unknown model kind; choose from {', '.join(MODEL_KINDS)}", "model.kind", lines.get("model.kind"))
        Ns = model["N"] if isinstance(model["N"], list) else [model["N"]]
        if not Ns:
            raise ConfigError("N list must be nonempty", "model.N", lines.get("model.N"))
        if any(not isinstance(n, int) or isinstance(n, bool) or n < 1 for n in Ns):
            raise ConfigError("N values must be positive integers", "model.N", lines.get("model.N"))
    dom = data.get("domain")
    if dom:
        from .domain import GRID_RULES

        if dom.get("rule", "full-closure") not in GRID_RULES:
            raise ConfigError(f"unknown grid rule; choose from {', '.join(GRID_RULES)}", "domain.rule", lines.get("domain.rule"))
    pot = data.get("potential")
    if pot:
        from .potentials import SMOOTH_KINDS

        if pot.get("smooth", "zero") not in SMOOTH_KINDS:
            raise ConfigError(f"unknown smooth part; choose from {', '.join(SMOOTH_KINDS)}", "potential.smooth", lines.get("potential.smooth"))
        if len(pot.get("levels", [])) != len(pot.get("jumps", [])):
            raise ConfigError("levels and jumps must have equal length", "potential.jumps", lines.get("potential.jumps"))
    samp = data.get("sampler")
    if samp and samp.get("method", "auto") not in SAMPLER_METHODS:
        raise ConfigError(f"unknown sampler method; choose from {', '.join(SAMPLER_METHODS)}", "sampler.method", lines.get("sampler.method"))
    sde = data.get("sde")
    if sde:
        for key in ("dt", "T"):
            if key in sde and sde[key] <= 0:
                raise ConfigError("must be positive", f"sde.{key}", lines.get(f"sde.{key}"))
    out = data.get("output")
    if out and out.get("format", "csv") not in ("csv", "json"):
        raise ConfigError("format must be csv or json", "output.format", lines.get("output.format"))
    return RunConfig(data)


def load_config(path) -> RunConfig:
    with open(path) as fh:
        text = fh.read()
    try:
        data = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        raise ConfigError(f"YAML parse error: {getattr(exc, 'problem', exc)}", line=None if mark is None else mark.line + 1) from exc
    cfg = validate(data, _line_index(text))
    cfg.source = str(path)
    return cfg
