"""Run configuration: a single JSON document with fail-fast validation.

Unknown keys are rejected outright; a silently ignored typo in a
hyperparameter would invalidate reproducibility claims. Every stochastic
stage derives its seed from the master seed under a fixed label:
``graph``, ``panel``, ``fit``, ``train``/``("train", p)``, ``eval``.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

from .rng import derive_seed


class ConfigError(ValueError):
    pass


_SCHEMA = {
    "seed": None,
    "out": None,
    "threads": None,
    "graph": {
        "kind": None,
        "block_sizes": None,
        "p_in": None,
        "p_out": None,
        "path": None,
        "partition_path": None,
        "min_size": None,
    },
    "sis": {"spread": None, "churn": None},
    "panel": {"t_train": None, "logging_policy": None},
    "ising": {
        "estimator": None,
        "v0": None,
        "v1": None,
        "c": None,
        "tau2": None,
        "tol": None,
        "max_iters": None,
        "draws": None,
        "tune": None,
    },
    "rl": {
        "algorithm": None,
        "state": None,
        "hidden": None,
        "batch_size": None,
        "lr": None,
        "dropout": None,
        "psi": None,
        "alpha": None,
        "max_steps": None,
        "steps_per_epoch": None,
        "patience": None,
        "min_delta": None,
        "ridge": None,
        "bonus_beta": None,
        "horizon": None,
    },
    "eval": {"horizon": None, "n_runs": None, "policies": None},
}

_DEFAULTS = {
    "panel": {"logging_policy": "random_bin"},
    "ising": {"estimator": "emvs", "v0": 0.01, "v1": 10.0, "c": 1.0, "tau2": 10.0,
              "tol": 1e-4, "max_iters": 500, "draws": 10, "tune": 300},
    "rl": {"algorithm": "cql", "state": "beliefs", "hidden": [256, 256], "batch_size": 64,
           "lr": 3e-4, "dropout": 0.3, "psi": 0.8, "alpha": 0.1, "max_steps": 30000,
           "steps_per_epoch": 1000, "patience": 10, "min_delta": 1e-4,
           "ridge": 1.0, "bonus_beta": 1.0, "horizon": 25},
    "eval": {"horizon": 25, "n_runs": 50,
             "policies": ["random_bin", "degree", "degree_bin", "lir", "learned_q"]},
}


def _check_keys(doc: dict, schema: dict, prefix: str = "") -> None:
    for key, value in doc.items():
        if key not in schema:
            raise ConfigError(f"unknown config key {prefix}{key!r}")
        sub = schema[key]
        if isinstance(sub, dict):
            if not isinstance(value, dict):
                raise ConfigError(f"config section {prefix}{key!r} must be an object")
            _check_keys(value, sub, prefix=f"{prefix}{key}.")


@dataclass
class RunConfig:
    doc: dict
    base_dir: Path

    @staticmethod
    def load(path) -> "RunConfig":
        path = Path(path)
        try:
            doc = json.loads(path.read_text(encoding="utf-8"))
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config is not valid JSON: {exc}") from exc
        if not isinstance(doc, dict):
            raise ConfigError("config root must be a JSON object")
        _check_keys(doc, _SCHEMA)
        return RunConfig(doc=doc, base_dir=path.parent)

    @staticmethod
    def from_dict(doc: dict, base_dir=".") -> "RunConfig":
        _check_keys(doc, _SCHEMA)
        return RunConfig(doc=doc, base_dir=Path(base_dir))

    def dump(self) -> str:
        return json.dumps(self.doc, sort_keys=True, indent=1)

    def section(self, name: str) -> dict:
        merged = dict(_DEFAULTS.get(name, {}))
        merged.update(self.doc.get(name, {}))
        return merged

    def require(self, name: str) -> dict:
        if name not in self.doc:
            raise ConfigError(f"config is missing the {name!r} section")
        return self.section(name)

    @property
    def seed(self) -> int:
        return int(self.doc.get("seed", 0))

    @property
    def threads(self) -> int:
        return int(self.doc.get("threads", 1))

    def subseed(self, *labels) -> int:
        """Stage seed derived from the master seed by labeled hashing."""
        words = derive_seed(self.seed, *labels)
        return int(words[0])

    def resolve(self, rel_path: str) -> Path:
        p = Path(rel_path)
        return p if p.is_absolute() else self.base_dir / p
