"""Experiment manifests: JSON configs with validation and hashing.

A config is one JSON object with `dataset`, `model`, `train`, `split`,
`unlearn`, and `eval` blocks. Loading validates types, ranges, and the
existence of every referenced path, and reports offending keys by their
dotted path. The sha256 of the canonical serialization ties reports to the
exact manifest that produced them.
"""

import hashlib
import json
import os
from dataclasses import dataclass, field

from . import data as data_mod
from .nn import ModelSpec, Network
from .trim import INIT_STRATEGIES
from .training import TrainConfig

UNLEARN_METHODS = ("scissorhands", "retrain", "finetune", "gradient_ascent")


class ConfigError(ValueError):
    pass


def canonical_json(obj):
    return json.dumps(obj, indent=2, sort_keys=True) + "\n"


def _require(block, key, path):
    if key not in block:
        raise ConfigError(f"missing key {path}.{key}")
    return block[key]

def _get_num(block, key, path, default=None, minimum=None, maximum=None,
             exclusive_min=False, exclusive_max=False, integer=False):
    if key not in block:
        if default is None:
            raise ConfigError(f"missing key {path}.{key}")
        return default
    value = block[key]
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"{path}.{key} must be a number")
    if integer and int(value) != value:
        raise ConfigError(f"{path}.{key} must be an integer")
    if minimum is not None and (value <= minimum if exclusive_min else value < minimum):
        raise ConfigError(f"{path}.{key} out of range")
    if maximum is not None and (value >= maximum if exclusive_max else value > maximum):
        raise ConfigError(f"{path}.{key} out of range")
    return int(value) if integer else float(value)


def _get_bool(block, key, path, default):
    value = block.get(key, default)
    if not isinstance(value, bool):
        raise ConfigError(f"{path}.{key} must be a boolean")
    return value


def _check_path(block, key, path):
    p = _require(block, key, path)
    if not isinstance(p, str) or not os.path.exists(p):
        raise ConfigError(f"{path}.{key}: no such file {p!r}")
    return p


@dataclass
class UnlearnConfig:
    method: str
    k: float = 95.0
    balance: float = 0.05
    learning_rate: float = 0.1
    epochs: int = 10
    batch_size: int = 32
    trim_subset_ratio: float = 1.0
    init_strategy: str = "uniform"
    seed: int = 0
    use_projection: bool = True
    trim_biases: bool = True
    signed_ranking: bool = False
    per_layer: bool = False
    baseline: dict = None  # epochs/learning_rate/batch_size/seed overrides


@dataclass
class EvalConfig:
    mia: bool = True
    mia_seed: int = 0
    avg_gap: bool = False
    reference_report: str = None
    relearn: dict = None
    rte_unlearn_report: str = None
    rte_retrain_report: str = None


@dataclass
class ExperimentConfig:
    raw: dict
    dataset: dict
    model: ModelSpec
    train: TrainConfig
    split_mode: str
    split_arg: object  # fraction (sample_wise) or class list (class_wise)
    split_seed: int
    unlearn: UnlearnConfig
    eval: EvalConfig = field(default_factory=EvalConfig)

    def config_hash(self):
        return hashlib.sha256(canonical_json(self.raw).encode()).hexdigest()


def _parse_dataset(block):
    kind = _require(block, "kind", "dataset")
    if kind == "blobs":
        _get_num(block, "classes", "dataset", minimum=2, integer=True)
        _get_num(block, "per_class", "dataset", minimum=1, integer=True)
        _get_num(block, "dim", "dataset", minimum=1, integer=True)
        _get_num(block, "spread", "dataset", minimum=0.0, exclusive_min=True)
        _get_num(block, "seed", "dataset", minimum=0, integer=True)
        _get_num(block, "test_per_class", "dataset", minimum=1, integer=True)
    elif kind == "idx":
        _check_path(block, "images", "dataset")
        _check_path(block, "labels", "dataset")
        _check_path(block, "test_images", "dataset")
        _check_path(block, "test_labels", "dataset")
    elif kind == "csv":
        _check_path(block, "train", "dataset")
        _check_path(block, "test", "dataset")
    else:
        raise ConfigError(f"dataset.kind: unknown kind {kind!r}")
    return dict(block)


def _parse_model(block):
    sizes = _require(block, "layer_sizes", "model")
    if (not isinstance(sizes, list) or len(sizes) < 2
            or any(not isinstance(n, int) or n < 1 for n in sizes)):
        raise ConfigError("model.layer_sizes must be a list of >=2 positive integers")
    activation = block.get("activation", "relu")
    seed = _get_num(block, "seed", "model", default=0, minimum=0, integer=True)
    try:
        return ModelSpec(tuple(sizes), activation, seed)
    except ValueError as e:
        raise ConfigError(f"model: {e}") from e


def _parse_train(block):
    try:
        return TrainConfig(
            epochs=_get_num(block, "epochs", "train", minimum=0, integer=True),
            learning_rate=_get_num(block, "learning_rate", "train", minimum=0.0, exclusive_min=True),
            batch_size=_get_num(block, "batch_size", "train", minimum=1, integer=True),
            seed=_get_num(block, "seed", "train", default=0, minimum=0, integer=True),
            lr_decay=_get_num(block, "lr_decay", "train", default=1.0, minimum=0.0,
                              maximum=1.0, exclusive_min=True),
        )
    except ValueError as e:
        raise ConfigError(f"train: {e}") from e


def _parse_split(block):
    mode = _require(block, "mode", "split")
    seed = _get_num(block, "seed", "split", default=0, minimum=0, integer=True)
    if mode == "sample_wise":
        frac = _get_num(block, "fraction", "split", minimum=0.0, maximum=1.0,
                        exclusive_min=True, exclusive_max=True)
        return mode, frac, seed
    if mode == "class_wise":
        classes = _require(block, "classes", "split")
        if not isinstance(classes, list) or not classes:
            raise ConfigError("split.classes must be a non-empty list")
        return mode, [int(c) for c in classes], seed
    raise ConfigError(f"split.mode: unknown mode {mode!r}")


def _parse_unlearn(block):
    method = _require(block, "method", "unlearn")
    if method not in UNLEARN_METHODS:
        raise ConfigError(f"unlearn.method: unknown method {method!r}")
    init_strategy = block.get("init_strategy", "uniform")
    if init_strategy not in INIT_STRATEGIES:
        raise ConfigError(f"unlearn.init_strategy: unknown strategy {init_strategy!r}")
    baseline = block.get("baseline")
    if baseline is not None and not isinstance(baseline, dict):
        raise ConfigError("unlearn.baseline must be an object")
    return UnlearnConfig(
        method=method,
        k=_get_num(block, "k", "unlearn", default=95.0, minimum=0.0, maximum=100.0, exclusive_max=True),
        balance=_get_num(block, "lambda", "unlearn", default=0.05, minimum=0.0),
        learning_rate=_get_num(block, "learning_rate", "unlearn", default=0.1, minimum=0.0, exclusive_min=True),
        epochs=_get_num(block, "epochs", "unlearn", default=10, minimum=0, integer=True),
        batch_size=_get_num(block, "batch_size", "unlearn", default=32, minimum=1, integer=True),
        trim_subset_ratio=_get_num(block, "p", "unlearn", default=1.0, minimum=0.0, maximum=1.0, exclusive_min=True),
        init_strategy=init_strategy,
        seed=_get_num(block, "seed", "unlearn", default=0, minimum=0, integer=True),
        use_projection=_get_bool(block, "use_projection", "unlearn", True),
        trim_biases=_get_bool(block, "trim_biases", "unlearn", True),
        signed_ranking=_get_bool(block, "signed_ranking", "unlearn", False),
        per_layer=_get_bool(block, "per_layer", "unlearn", False),
        baseline=baseline,
    )


def _parse_eval(block):
    reference = block.get("reference_report")
    if reference is not None and not os.path.exists(reference):
        raise ConfigError(f"eval.reference_report: no such file {reference!r}")
    relearn = block.get("relearn")
    if relearn is not None:
        _get_num(relearn, "target_acc_df", "eval.relearn", minimum=0.0, maximum=100.0)
        _get_num(relearn, "learning_rate", "eval.relearn", minimum=0.0, exclusive_min=True)
        _get_num(relearn, "cap", "eval.relearn", minimum=1, integer=True)
    for key in ("rte_unlearn_report", "rte_retrain_report"):
        p = block.get(key)
        if p is not None and not os.path.exists(p):
            raise ConfigError(f"eval.{key}: no such file {p!r}")
    return EvalConfig(
        mia=_get_bool(block, "mia", "eval", True),
        mia_seed=_get_num(block, "mia_seed", "eval", default=0, minimum=0, integer=True),
        avg_gap=_get_bool(block, "avg_gap", "eval", False),
        reference_report=reference,
        relearn=relearn,
        rte_unlearn_report=block.get("rte_unlearn_report"),
        rte_retrain_report=block.get("rte_retrain_report"),
    )


def parse_config(raw):
    if not isinstance(raw, dict):
        raise ConfigError("config root must be a JSON object")
    for name in ("dataset", "model", "train", "split", "unlearn"):
        if name not in raw:
            raise ConfigError(f"missing block {name!r}")
        if not isinstance(raw[name], dict):
            raise ConfigError(f"block {name!r} must be an object")
    mode, arg, seed = _parse_split(raw["split"])
    return ExperimentConfig(
        raw=raw,
        dataset=_parse_dataset(raw["dataset"]),
        model=_parse_model(raw["model"]),
        train=_parse_train(raw["train"]),
        split_mode=mode,
        split_arg=arg,
        split_seed=seed,
        unlearn=_parse_unlearn(raw["unlearn"]),
        eval=_parse_eval(raw.get("eval", {})),
    )


def load_config(path):
    try:
        with open(path, "r", encoding="utf-8") as f:
            raw = json.load(f)
    except FileNotFoundError as e:
        raise ConfigError(f"config file not found: {path}") from e
    except json.JSONDecodeError as e:
        raise ConfigError(f"{path}: invalid JSON at line {e.lineno} column {e.colno}: {e.msg}") from e
    return parse_config(raw)


# ---------------------------------------------------------------------------
# builders shared by CLI commands
# ---------------------------------------------------------------------------

def build_datasets(dataset_block):
    """Materialize (train, test) datasets from a config dataset block."""
    kind = dataset_block["kind"]
    if kind == "blobs":
        full = data_mod.gen_blobs(
            classes=dataset_block["classes"],
            per_class=dataset_block["per_class"] + dataset_block["test_per_class"],
            dim=dataset_block["dim"],
            spread=dataset_block["spread"],
            seed=dataset_block["seed"],
        )
        return data_mod.carve_test_per_class(full, dataset_block["test_per_class"])
    if kind == "idx":
        train = data_mod.load_idx(dataset_block["images"], dataset_block["labels"],
                                  dataset_block.get("class_count"))
        test = data_mod.load_idx(dataset_block["test_images"], dataset_block["test_labels"],
                                 train.class_count)
        return train, test
    train = data_mod.load_csv(dataset_block["train"], dataset_block.get("class_count"))
    test = data_mod.load_csv(dataset_block["test"], train.class_count)
    return train, test


def build_network(cfg, train_ds):
    spec = cfg.model
    if spec.layer_sizes[0] != train_ds.n_features:
        raise ConfigError(
            f"model.layer_sizes[0] = {spec.layer_sizes[0]} but dataset has {train_ds.n_features} features")
    if spec.class_count != train_ds.class_count:
        raise ConfigError(
            f"model.layer_sizes[-1] = {spec.class_count} but dataset has {train_ds.class_count} classes")
    return Network(spec)


def build_split(cfg, train_ds):
    try:
        return data_mod.make_split(train_ds, cfg.split_mode, cfg.split_arg, cfg.split_seed)
    except ValueError as e:
        raise ConfigError(f"split: {e}") from e
