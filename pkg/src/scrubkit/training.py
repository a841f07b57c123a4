"""Plain minibatch SGD with seeded shuffling and a divergence guard."""

from dataclasses import dataclass, field

import numpy as np

LOSS_CAP = 1e6


class DivergenceError(RuntimeError):
    """Loss left the finite / bounded regime during an update loop."""


@dataclass
class TrainConfig:
    epochs: int
    learning_rate: float
    batch_size: int
    seed: int = 0
    lr_decay: float = 1.0  # per-epoch multiplicative factor (1.0 = constant lr)

    def __post_init__(self):
        if self.epochs < 0:
            raise ValueError("epochs must be non-negative")
        if self.learning_rate <= 0:
            raise ValueError("learning rate must be positive")
        if self.batch_size < 1:
            raise ValueError("batch size must be positive")
        if not 0.0 < self.lr_decay <= 1.0:
            raise ValueError("lr_decay must lie in (0, 1]")


@dataclass
class TrainRun:
    params: np.ndarray
    epoch_losses: list = field(default_factory=list)
    diverged: bool = False


def _loss_ok(loss):
    return np.isfinite(loss) and abs(loss) <= LOSS_CAP


def sgd_train(net, params0, x, y, cfg, ascent=False, stop_on_divergence=False,
              on_epoch=None):
    """Run cfg.epochs of minibatch SGD from params0 (which is not mutated).

    `ascent=True` negates the update (gradient ascent). On divergence either
    raises DivergenceError or, with `stop_on_divergence`, returns the last
    finite iterate flagged as diverged. `on_epoch(epoch, params)` runs after
    every epoch; a truthy return stops training early.
    """
    params = np.array(params0, dtype=np.float64, copy=True)
    n = x.shape[0]
    rng = np.random.default_rng(cfg.seed)
    sign = 1.0 if ascent else -1.0
    run = TrainRun(params)

    prev = params.copy()
    lr = cfg.learning_rate
    for epoch in range(cfg.epochs):
        order = rng.permutation(n)
        losses = []
        for start in range(0, n, cfg.batch_size):
            idx = order[start:start + cfg.batch_size]
            loss, grad = net.loss_and_grad(params, x[idx], y[idx])
            if not _loss_ok(loss):
                if stop_on_divergence:
                    run.params = prev  # last iterate that produced a finite loss
                    run.diverged = True
                    return run
                raise DivergenceError(f"loss {loss} at epoch {epoch}")
            prev = params.copy()
            params += sign * lr * grad
            losses.append(loss)
        lr *= cfg.lr_decay
        run.epoch_losses.append(float(np.mean(losses)))
        if on_epoch is not None and on_epoch(epoch, params):
            break

    run.params = params
    return run
