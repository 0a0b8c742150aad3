"""JSON run configuration mirroring ExperimentConfig.

Documents are validated strictly: unknown keys are rejected at every
nesting level and all values are type-checked before anything runs.
"""

import json
from pathlib import Path

from .bilevel import BilevelConfig
from .data import SynthSpec
from .errors import ConfigurationError
from .orchestrator import DEFAULT_GRID, ExperimentConfig
from .trainer import TrainConfig

_BILEVEL_KEYS = {"t1", "t2", "inner_lr", "outer_lr", "outer_optimizer", "lambda_init"}
_TRAIN_KEYS = {"total_steps", "lr", "main_optimizer", "batch_fraction",
               "early_stop_patience", "seed", "bilevel"}
_EXPERIMENT_KEYS = {"strategy", "trainer_kind", "m", "seeds", "total_budget",
                    "train", "grid", "val_size", "test_size"}
_SYNTH_KEYS = {"num_classes", "dim", "class_separation", "within_class_stddev",
               "points_per_class", "seed"}


def _reject_unknown(doc: dict, allowed: set, where: str):
    if not isinstance(doc, dict):
        raise ConfigurationError(f"{where} must be a JSON object")
    unknown = sorted(set(doc) - allowed)
    if unknown:
        raise ConfigurationError(f"unknown keys in {where}: {', '.join(unknown)}")


def _get(doc, key, kinds, where, default=None, required=False):
    if key not in doc:
        if required:
            raise ConfigurationError(f"missing required key {key!r} in {where}")
        return default
    value = doc[key]
    if value is None:
        return default
    if not isinstance(value, kinds) or isinstance(value, bool):
        raise ConfigurationError(f"{where}.{key} has the wrong type: {value!r}")
    return value


def bilevel_config_from_dict(doc: dict) -> BilevelConfig:
    _reject_unknown(doc, _BILEVEL_KEYS, "train.bilevel")
    defaults = BilevelConfig()
    return BilevelConfig(
        t1=int(_get(doc, "t1", int, "train.bilevel", defaults.t1)),
        t2=int(_get(doc, "t2", int, "train.bilevel", defaults.t2)),
        inner_lr=float(_get(doc, "inner_lr", (int, float), "train.bilevel", defaults.inner_lr)),
        outer_lr=float(_get(doc, "outer_lr", (int, float), "train.bilevel", defaults.outer_lr)),
        outer_optimizer=_get(doc, "outer_optimizer", str, "train.bilevel", defaults.outer_optimizer),
        lambda_init=float(_get(doc, "lambda_init", (int, float), "train.bilevel", defaults.lambda_init)),
    )


def train_config_from_dict(doc: dict) -> TrainConfig:
    _reject_unknown(doc, _TRAIN_KEYS, "train")
    defaults = TrainConfig()
    bilevel_doc = doc.get("bilevel", {})
    return TrainConfig(
        total_steps=int(_get(doc, "total_steps", int, "train", defaults.total_steps)),
        lr=float(_get(doc, "lr", (int, float), "train", defaults.lr)),
        main_optimizer=_get(doc, "main_optimizer", str, "train", defaults.main_optimizer),
        batch_fraction=float(_get(doc, "batch_fraction", (int, float), "train", defaults.batch_fraction)),
        early_stop_patience=int(_get(doc, "early_stop_patience", int, "train", defaults.early_stop_patience)),
        seed=int(_get(doc, "seed", int, "train", defaults.seed)),
        bilevel=bilevel_config_from_dict(bilevel_doc),
    )


def experiment_config_from_dict(doc: dict) -> ExperimentConfig:
    _reject_unknown(doc, _EXPERIMENT_KEYS, "config")
    seeds = _get(doc, "seeds", list, "config", required=True)
    if not all(isinstance(s, int) and not isinstance(s, bool) for s in seeds):
        raise ConfigurationError("config.seeds must be a list of integers")
    grid = _get(doc, "grid", list, "config", list(DEFAULT_GRID))
    if not all(isinstance(g, (int, float)) and not isinstance(g, bool) for g in grid):
        raise ConfigurationError("config.grid must be a list of numbers")
    return ExperimentConfig(
        strategy=_get(doc, "strategy", str, "config", required=True),
        trainer_kind=_get(doc, "trainer_kind", str, "config", required=True),
        m=int(_get(doc, "m", int, "config", required=True)),
        seeds=tuple(seeds),
        total_budget=int(_get(doc, "total_budget", int, "config", 500)),
        train=train_config_from_dict(doc.get("train", {})),
        grid=tuple(float(g) for g in grid),
        val_size=_get(doc, "val_size", int, "config"),
        test_size=_get(doc, "test_size", int, "config"),
    )


def synth_spec_from_dict(doc: dict) -> SynthSpec:
    _reject_unknown(doc, _SYNTH_KEYS, "spec")
    return SynthSpec(
        num_classes=int(_get(doc, "num_classes", int, "spec", required=True)),
        dim=int(_get(doc, "dim", int, "spec", required=True)),
        class_separation=float(_get(doc, "class_separation", (int, float), "spec", required=True)),
        within_class_stddev=float(_get(doc, "within_class_stddev", (int, float), "spec", required=True)),
        points_per_class=int(_get(doc, "points_per_class", int, "spec", required=True)),
        seed=int(_get(doc, "seed", int, "spec", 0)),
    )


def _load_json(path) -> dict:
    path = Path(path)
    if not path.exists():
        raise ConfigurationError(f"config file not found: {path}")
    try:
        return json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise ConfigurationError(f"{path}: invalid JSON: {exc}") from exc


def load_experiment_config(path) -> ExperimentConfig:
    return experiment_config_from_dict(_load_json(path))


def load_synth_spec(path) -> SynthSpec:
    return synth_spec_from_dict(_load_json(path))
