"""Repairing: descent on retain-minus-forget loss, projected away from the
forget gradient.

Each step minimizes L = loss(retain) - balance * loss(forget). When the raw
objective gradient has positive inner product with the forget gradient, the
step direction is replaced by its Euclidean projection onto the halfspace
{u : <g_f, u> <= 0}, so no update has first-order benefit to the forget loss.
"""

from dataclasses import dataclass

import numpy as np

from .training import LOSS_CAP, DivergenceError


@dataclass
class RepairConfig:
    balance: float  # weight of the forget-loss term
    learning_rate: float
    epochs: int
    batch_size: int
    seed: int = 0
    use_projection: bool = True

    def __post_init__(self):
        if self.balance < 0:
            raise ValueError("balance must be non-negative")
        if self.learning_rate <= 0:
            raise ValueError("learning rate must be positive")
        if self.epochs < 0:
            raise ValueError("epochs must be non-negative")
        if self.batch_size < 1:
            raise ValueError("batch size must be positive")


@dataclass
class RepairStep:
    step: int
    objective: float
    retain_loss: float
    forget_loss: float
    go_dot_gf: float
    v: float
    gf_dot_g: float  # inner product after projection (for invariant checks)
    gf_norm: float
    g_norm: float

    def to_dict(self):
        return {
            "step": self.step,
            "objective": self.objective,
            "retain_loss": self.retain_loss,
            "forget_loss": self.forget_loss,
            "go_dot_gf": self.go_dot_gf,
            "v": self.v,
            "gf_dot_g": self.gf_dot_g,
            "gf_norm": self.gf_norm,
            "g_norm": self.g_norm,
        }


def objective_and_grads(net, params, retain_x, retain_y, forget_x, forget_y, balance):
    """Scalarized objective and its gradients: one gradient sweep per batch.

    Returns (L, g_o, g_f, retain_loss, forget_loss) with
    L = retain_loss - balance * forget_loss and g_o = its gradient.
    """
    retain_loss, retain_grad = net.loss_and_grad(params, retain_x, retain_y)
    forget_loss, forget_grad = net.loss_and_grad(params, forget_x, forget_y)
    objective = retain_loss - balance * forget_loss
    g_o = retain_grad - balance * forget_grad
    return objective, g_o, forget_grad, retain_loss, forget_loss


def project_gradient(g_o, g_f):
    """Euclidean projection of g_o onto {u : <g_f, u> <= 0}.

    Returns (g, v). If the constraint is already satisfied (or g_f vanishes)
    g is g_o unchanged and v = 0; otherwise v = <g_o,g_f>/<g_f,g_f> and
    g = g_o - v*g_f, which zeroes the inner product.
    """
    g_o = np.asarray(g_o, dtype=np.float64)
    g_f = np.asarray(g_f, dtype=np.float64)
    if not (np.isfinite(g_o).all() and np.isfinite(g_f).all()):
        raise ValueError("non-finite gradient input")
    gf_sq = float(g_f @ g_f)
    dot = float(g_o @ g_f)
    if gf_sq == 0.0 or dot <= 0.0:
        return g_o, 0.0
    v = dot / gf_sq
    return g_o - v * g_f, v


def _forget_batches(rng, forget_size, batch_size):
    """Cyclic forget-minibatch index stream, reshuffled whenever restarted."""
    order = rng.permutation(forget_size)
    ptr = 0
    while True:
        idx = order[(ptr + np.arange(batch_size)) % forget_size]
        ptr = (ptr + batch_size) % forget_size
        yield idx


def repair(net, params_t, retain_x, retain_y, forget_x, forget_y, cfg):
    """Run cfg.epochs of projected-descent repair from the trimmed parameters.

    Retain minibatches are reshuffled every epoch; each step pairs one with a
    forget minibatch drawn cyclically (reshuffled each epoch). Returns
    (params, trace) where trace holds one RepairStep per update.
    """
    params = np.array(params_t, dtype=np.float64, copy=True)
    trace = []
    if cfg.epochs == 0:
        return params, trace

    n = retain_x.shape[0]
    rng = np.random.default_rng(cfg.seed)
    step = 0
    for epoch in range(cfg.epochs):
        order = rng.permutation(n)
        forget_stream = _forget_batches(rng, forget_x.shape[0], cfg.batch_size)
        for start in range(0, n, cfg.batch_size):
            ridx = order[start:start + cfg.batch_size]
            fidx = next(forget_stream)
            objective, g_o, g_f, retain_loss, forget_loss = objective_and_grads(
                net, params, retain_x[ridx], retain_y[ridx],
                forget_x[fidx], forget_y[fidx], cfg.balance)
            if not (np.isfinite(objective) and abs(objective) <= LOSS_CAP):
                raise DivergenceError(f"objective {objective} at repair step {step}")
            dot = float(g_o @ g_f)
            if cfg.use_projection:
                g, v = project_gradient(g_o, g_f)
            else:
                g, v = g_o, 0.0
            trace.append(RepairStep(
                step=step,
                objective=objective,
                retain_loss=retain_loss,
                forget_loss=forget_loss,
                go_dot_gf=dot,
                v=v,
                gf_dot_g=float(g_f @ g),
                gf_norm=float(np.linalg.norm(g_f)),
                g_norm=float(np.linalg.norm(g)),
            ))
            params -= cfg.learning_rate * g
            step += 1
    return params, trace
