"""Reference unlearning procedures: retraining, fine-tuning, gradient ascent."""

from dataclasses import dataclass

from .training import TrainConfig, sgd_train

BASELINE_METHODS = ("retrain", "finetune", "gradient_ascent")


@dataclass
class BaselineConfig:
    method: str
    epochs: int
    learning_rate: float
    batch_size: int
    seed: int = 0
    lr_decay: float = 1.0

    def __post_init__(self):
        if self.method not in BASELINE_METHODS:
            raise ValueError(f"unknown baseline {self.method!r}")

    def train_config(self):
        return TrainConfig(self.epochs, self.learning_rate, self.batch_size,
                           self.seed, self.lr_decay)


def retrain(net, dataset, split, cfg):
    """Train a fresh model on the retain set only (the gold reference).

    The retain subset is materialized up front, so no forget sample is ever
    read by the optimization.
    """
    retain = dataset.take(split.retain_indices)
    return sgd_train(net, net.init_params(), retain.inputs, retain.labels,
                     cfg.train_config())


def finetune(net, params_orig, dataset, split, cfg):
    """Continue SGD from the original parameters on the retain set only."""
    retain = dataset.take(split.retain_indices)
    return sgd_train(net, params_orig, retain.inputs, retain.labels,
                     cfg.train_config())


def gradient_ascent(net, params_orig, dataset, split, cfg):
    """SGD with negated gradients on the forget set.

    Ascent diverges readily; on a non-finite loss the run stops and returns
    the last finite iterate with `diverged=True`.
    """
    forget = dataset.take(split.forget_indices)
    return sgd_train(net, params_orig, forget.inputs, forget.labels,
                     cfg.train_config(), ascent=True, stop_on_divergence=True)
