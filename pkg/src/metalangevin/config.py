"""Versioned JSON experiment configuration.

Layout::

    {"schema_version": 1,
     "landscape": {"family": "quadratic", "params": {...}},
     "params": {"epsilon": ..., "delta": ..., "r": ..., "T": ..., ...},
     "run": {"replicas": ..., "seed": ..., ...},
     "output": {"directory": ..., "formats": [...]}}

Unknown keys are rejected and the offending dotted path is named.
"""

from __future__ import annotations

import copy
import hashlib
import json
from dataclasses import dataclass, field
from typing import Any, Optional

SCHEMA_VERSION = 1
FORMATS = ("json", "csv", "md", "png")

FAMILY_KEYS = {
    "quadratic": {"dimension", "curvatures", "matrix", "center", "b", "hessian_lipschitz"},
    "double_well": {"dimension", "barrier_scale"},
    "gaussian_location": {"dimension", "n", "mean", "truncation", "seed", "ridge", "hessian_lipschitz"},
    "perturbed_quadratic": {"dimension", "n", "scale", "seed", "quartic", "m"},
}

PARAM_KEYS = {"epsilon", "delta", "r", "T", "c1", "c2", "c0", "c", "c_prime", "c_reflect", "eps0"}
PARAM_REQUIRED = ("epsilon", "delta", "r", "T")

RUN_DEFAULTS: dict[str, Any] = {
    "replicas": 1,
    "seed": 0,
    "eta": None,
    "beta": None,
    "noiseless": False,
    "horizon_K": None,
    "substep_factor": 1,
    "initial_point": None,
    "betas": None,
    "budget_K": None,
    "noise_aggregation": 1,
    "save_trajectories": False,
    "trajectory_format": "binary",
    "workers": 1,
}

OUTPUT_DEFAULTS: dict[str, Any] = {"directory": "out", "formats": ["json"]}


class ConfigError(ValueError):
    """Malformed configuration; ``path`` is the dotted location of the problem."""

    def __init__(self, message: str, path: str = ""):
        super().__init__(f"{path}: {message}" if path else message)
        self.path = path


def _reject_unknown(block: dict, allowed, path: str) -> None:
    if not isinstance(block, dict):
        raise ConfigError("expected an object", path)
    for k in block:
        if k not in allowed:
            raise ConfigError(f"unknown key (allowed: {', '.join(sorted(allowed))})", f"{path}.{k}" if path else k)


@dataclass
class ExperimentConfig:
    family: str
    landscape_params: dict
    params: Optional[dict] = None
    run: dict = field(default_factory=lambda: dict(RUN_DEFAULTS))
    output: dict = field(default_factory=lambda: copy.deepcopy(OUTPUT_DEFAULTS))
    schema_version: int = SCHEMA_VERSION

    @classmethod
    def from_dict(cls, raw: dict) -> "ExperimentConfig":
        _reject_unknown(raw, {"schema_version", "landscape", "params", "run", "output"}, "")
        ver = raw.get("schema_version")
        if ver != SCHEMA_VERSION:
            raise ConfigError(f"unsupported schema_version {ver!r} (expected {SCHEMA_VERSION})", "schema_version")
        land = raw.get("landscape")
        if land is None:
            raise ConfigError("missing block", "landscape")
        _reject_unknown(land, {"family", "params"}, "landscape")
        fam = land.get("family")
        if fam not in FAMILY_KEYS:
            raise ConfigError(f"unknown family {fam!r} (available: {', '.join(FAMILY_KEYS)})", "landscape.family")
        lp = land.get("params", {})
        _reject_unknown(lp, FAMILY_KEYS[fam], "landscape.params")

        params = raw.get("params")
        if params is not None:
            _reject_unknown(params, PARAM_KEYS, "params")
            for k in PARAM_REQUIRED:
                if k not in params:
                    raise ConfigError("missing required key", f"params.{k}")

        run = dict(RUN_DEFAULTS)
        r = raw.get("run", {})
        _reject_unknown(r, RUN_DEFAULTS.keys(), "run")
        run.update(r)
        if not isinstance(run["replicas"], int) or run["replicas"] < 1:
            raise ConfigError("must be a positive integer", "run.replicas")
        if not isinstance(run["seed"], int) or run["seed"] < 0:
            raise ConfigError("must be a nonnegative integer", "run.seed")
        if run["trajectory_format"] not in ("binary", "csv"):
            raise ConfigError("must be 'binary' or 'csv'", "run.trajectory_format")

        out = copy.deepcopy(OUTPUT_DEFAULTS)
        o = raw.get("output", {})
        _reject_unknown(o, OUTPUT_DEFAULTS.keys(), "output")
        out.update(o)
        for i, f in enumerate(out["formats"]):
            if f not in FORMATS:
                raise ConfigError(f"unknown format {f!r} (available: {', '.join(FORMATS)})", f"output.formats[{i}]")
        return cls(fam, dict(lp), None if params is None else dict(params), run, out, ver)

    def to_dict(self) -> dict:
        d = {"schema_version": self.schema_version,
             "landscape": {"family": self.family, "params": copy.deepcopy(self.landscape_params)}}
        if self.params is not None:
            d["params"] = dict(self.params)
        d["run"] = dict(self.run)
        d["output"] = copy.deepcopy(self.output)
        return d

    def dumps(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"

    def digest(self) -> str:
        return hashlib.sha256(json.dumps(self.to_dict(), sort_keys=True).encode()).hexdigest()


def loads(text: str) -> ExperimentConfig:
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as e:
        raise ConfigError(f"invalid JSON at line {e.lineno}, column {e.colno}: {e.msg}") from None
    return ExperimentConfig.from_dict(raw)


def load(path) -> ExperimentConfig:
    with open(path, encoding="utf-8") as fh:
        return loads(fh.read())
