"""Run configuration: JSON schema, canonical serialization, hashing, and
the in-repo presets.

A run config selects one problem (with parameter overrides), one
architecture (with overrides), a training protocol, the seeds to repeat
over, and an output directory. The config hash covers every semantically
meaningful field; the output directory is excluded.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import asdict, dataclass, field

from .architectures import ARCHITECTURES
from .errors import ConfigurationError
from .problems import PROBLEMS
from .training import TrainConfig


@dataclass
class RunConfig:
    problem: str = "helmholtz"
    problem_params: dict = field(default_factory=dict)
    architecture: str = "pgcan"
    architecture_params: dict = field(default_factory=dict)
    training: TrainConfig = field(default_factory=TrainConfig)
    seeds: list = field(default_factory=lambda: [0])
    output_dir: str | None = None

    def __post_init__(self):
        if self.problem not in PROBLEMS:
            raise ConfigurationError(
                f"unknown problem '{self.problem}'; available: {sorted(PROBLEMS)}")
        if self.architecture not in ARCHITECTURES:
            raise ConfigurationError(
                f"unknown architecture '{self.architecture}'; "
                f"available: {sorted(ARCHITECTURES)}")
        if not self.seeds:
            raise ConfigurationError("at least one seed is required")

    def to_dict(self):
        out = asdict(self)
        out["training"] = asdict(self.training)
        return out

    @classmethod
    def from_dict(cls, data):
        data = dict(data)
        training = data.get("training", {})
        if isinstance(training, dict):
            known = set(TrainConfig.__dataclass_fields__)
            unknown = set(training) - known
            if unknown:
                raise ConfigurationError(f"unknown training fields: {sorted(unknown)}")
            data["training"] = TrainConfig(**training)
        unknown = set(data) - set(cls.__dataclass_fields__)
        if unknown:
            raise ConfigurationError(f"unknown config fields: {sorted(unknown)}")
        return cls(**data)


def canonical_json(config):
    """Deterministic JSON: sorted keys, compact separators."""
    data = config.to_dict() if isinstance(config, RunConfig) else dict(config)
    return json.dumps(data, sort_keys=True, separators=(",", ":"))


def config_hash(config):
    """Hash of every semantically meaningful field (output_dir excluded)."""
    data = config.to_dict() if isinstance(config, RunConfig) else dict(config)
    data = {k: v for k, v in data.items() if k != "output_dir"}
    digest = hashlib.sha256(json.dumps(data, sort_keys=True,
                                       separators=(",", ":")).encode())
    return digest.hexdigest()[:16]


def load_config(path):
    with open(path) as fh:
        return RunConfig.from_dict(json.load(fh))


def save_config(path, config):
    with open(path, "w") as fh:
        fh.write(canonical_json(config))
        fh.write("\n")


# Desk-scale presets: "paper" mirrors the published protocol, "smoke" is a
# minutes-scale single-seed check.
PRESETS = {
    "paper": {
        "training": {"epochs": 50_000, "eval_every": 5_000, "precision": "fp32"},
        "seeds": list(range(10)),
    },
    "smoke": {
        "training": {"epochs": 2_000, "eval_every": 500, "n_interior": 2_000,
                     "precision": "fp32"},
        "seeds": [0],
    },
}


def apply_preset(data, preset):
    if preset not in PRESETS:
        raise ConfigurationError(f"unknown preset '{preset}'; available: {sorted(PRESETS)}")
    merged = {k: (dict(v) if isinstance(v, dict) else list(v))
              for k, v in PRESETS[preset].items()}
    for key, value in data.items():
        if key == "training" and "training" in merged:
            merged["training"].update(value)
        else:
            merged[key] = value
    return merged
