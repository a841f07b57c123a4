"""Metric suite: split accuracies, membership inference, gap-to-reference,
relearn time, and runtime ratio."""

import csv
import io
from dataclasses import dataclass
from decimal import ROUND_HALF_UP, Decimal

import numpy as np

from .training import TrainConfig, sgd_train

FEATURE_CAP = 1e6  # MIA loss features are clamped into [0, cap]

METHOD_ORDER = ("retrain", "finetune", "gradient_ascent", "scissorhands")


def fmt2(x):
    """Format to 2 decimals with decimal half-up rounding (table convention)."""
    return str(Decimal(repr(float(x))).quantize(Decimal("0.01"), rounding=ROUND_HALF_UP))


@dataclass
class MetricsReport:
    acc_df: float
    acc_dr: float
    acc_dt: float
    mia: float = None
    mia_threshold_frac: float = None
    mia_degenerate: bool = False
    avg_gap: float = None
    rte: float = None
    relearn_epochs: int = None
    relearn_exceeded: bool = False

    def to_dict(self):
        d = {
            "acc_df": self.acc_df,
            "acc_dr": self.acc_dr,
            "acc_dt": self.acc_dt,
        }
        if self.mia is not None:
            d["mia"] = self.mia
            d["mia_threshold_frac"] = self.mia_threshold_frac
            d["mia_degenerate"] = self.mia_degenerate
        if self.avg_gap is not None:
            d["avg_gap"] = self.avg_gap
        if self.rte is not None:
            d["rte"] = self.rte
        if self.relearn_epochs is not None or self.relearn_exceeded:
            d["relearn_epochs"] = self.relearn_epochs
            d["relearn_exceeded"] = self.relearn_exceeded
        return d

    @classmethod
    def from_dict(cls, d):
        return cls(
            acc_df=d["acc_df"], acc_dr=d["acc_dr"], acc_dt=d["acc_dt"],
            mia=d.get("mia"), mia_threshold_frac=d.get("mia_threshold_frac"),
            mia_degenerate=d.get("mia_degenerate", False),
            avg_gap=d.get("avg_gap"), rte=d.get("rte"),
            relearn_epochs=d.get("relearn_epochs"),
            relearn_exceeded=d.get("relearn_exceeded", False),
        )


def split_accuracies(net, params, ds, split, test_ds):
    """Accuracy (in percent) on the forget, retain, and held-out test sets."""
    if split.forget_indices.size == 0 or split.retain_indices.size == 0:
        raise ValueError("split has an empty part")
    forget = ds.take(split.forget_indices)
    retain = ds.take(split.retain_indices)
    acc_df = 100.0 * net.accuracy(params, forget.inputs, forget.labels)
    acc_dr = 100.0 * net.accuracy(params, retain.inputs, retain.labels)
    acc_dt = 100.0 * net.accuracy(params, test_ds.inputs, test_ds.labels)
    return acc_df, acc_dr, acc_dt


# ---------------------------------------------------------------------------
# membership inference
# ---------------------------------------------------------------------------

def _sigmoid(z):
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def fit_logistic_1d(features, targets, lr=1.0, max_iter=10000, tol=1e-10, l2=1e-6):
    """Single-feature logistic regression fitted by full-batch gradient descent.

    A tiny l2 term keeps the optimum finite when the feature separates the
    classes perfectly. Deterministic: zero init, fixed step size.
    """
    x = np.asarray(features, dtype=np.float64)
    t = np.asarray(targets, dtype=np.float64)
    w = 0.0
    b = 0.0
    for _ in range(max_iter):
        p = _sigmoid(w * x + b)
        gw = float(np.mean((p - t) * x)) + l2 * w
        gb = float(np.mean(p - t)) + l2 * b
        w -= lr * gw
        b -= lr * gb
        if max(abs(gw), abs(gb)) < tol:
            break
    return w, b


@dataclass
class MiaResult:
    mean_prob: float  # 100 * mean P(non-member | forget sample)
    threshold_frac: float  # 100 * fraction with P(non-member) > 0.5
    degenerate: bool = False


def mia_score(net, params, ds, split, test_ds, seed=0):
    """Loss-feature membership attack scored on the forget set.

    The attacker is a logistic classifier over the per-sample loss, fitted on
    a balanced sample of retain points (members, label 1) and held-out test
    points (non-members, label 0); the forget set itself is never used for
    fitting. Returned percentages are the mean predicted non-member
    probability (primary) and the fraction classified non-member at 0.5.
    """
    retain = ds.take(split.retain_indices)
    forget = ds.take(split.forget_indices)

    member_feats = net.per_sample_loss(params, retain.inputs, retain.labels)
    nonmember_feats = net.per_sample_loss(params, test_ds.inputs, test_ds.labels)
    n = min(member_feats.size, nonmember_feats.size)
    if n < 1:
        raise ValueError("need at least one member and one non-member sample")
    rng = np.random.default_rng(seed)
    member_feats = member_feats[rng.choice(member_feats.size, n, replace=False)]
    nonmember_feats = nonmember_feats[rng.choice(nonmember_feats.size, n, replace=False)]

    feats = np.clip(np.concatenate([member_feats, nonmember_feats]), 0.0, FEATURE_CAP)
    targets = np.concatenate([np.ones(n), np.zeros(n)])

    mu = float(feats.mean())
    sd = float(feats.std())
    if sd == 0.0:
        return MiaResult(50.0, 50.0, degenerate=True)

    w, b = fit_logistic_1d((feats - mu) / sd, targets)

    forget_feats = np.clip(net.per_sample_loss(params, forget.inputs, forget.labels),
                           0.0, FEATURE_CAP)
    p_nonmember = 1.0 - _sigmoid(w * (forget_feats - mu) / sd + b)
    return MiaResult(
        mean_prob=100.0 * float(p_nonmember.mean()),
        threshold_frac=100.0 * float((p_nonmember > 0.5).mean()),
    )


# ---------------------------------------------------------------------------
# comparisons
# ---------------------------------------------------------------------------

def _metric(report, key):
    if isinstance(report, dict):
        value = report.get(key)
    else:
        value = getattr(report, key, None)
    if value is None:
        raise ValueError(f"report is missing metric {key!r}")
    return float(value)


def avg_gap(report, reference):
    """Mean absolute gap over (acc_dt, acc_df, acc_dr, mia) vs the reference."""
    total = 0.0
    for key in ("acc_dt", "acc_df", "acc_dr", "mia"):
        total += abs(_metric(report, key) - _metric(reference, key))
    return total / 4.0


def rte(unlearn_seconds, retrain_seconds):
    """Runtime ratio of the unlearning pipeline to full retraining."""
    if retrain_seconds <= 0:
        raise ValueError("retrain time must be positive")
    return float(unlearn_seconds) / float(retrain_seconds)


def relearn_time(net, params_scrubbed, ds, split, target_acc_df, lr, cap,
                 batch_size=32, seed=0):
    """Epochs of fine-tuning on the full data until forget accuracy regains
    `target_acc_df` percent. Returns (epochs, exceeded_cap)."""
    if cap < 1:
        raise ValueError("cap must be at least 1")
    forget = ds.take(split.forget_indices)

    def acc_pct(p):
        return 100.0 * net.accuracy(p, forget.inputs, forget.labels)

    if acc_pct(params_scrubbed) >= target_acc_df:
        return 0, False

    reached = []

    def on_epoch(epoch, params):
        if acc_pct(params) >= target_acc_df:
            reached.append(epoch + 1)
            return True
        return False

    cfg = TrainConfig(epochs=cap, learning_rate=lr, batch_size=batch_size, seed=seed)
    sgd_train(net, params_scrubbed, ds.inputs, ds.labels, cfg, on_epoch=on_epoch)
    if reached:
        return reached[0], False
    return cap, True


def comparison_table(rows):
    """Render (method, report) pairs as a fixed-width table and a CSV string.

    Rows follow METHOD_ORDER first, then any extra methods alphabetically.
    """
    by_method = dict(rows)
    ordered = [m for m in METHOD_ORDER if m in by_method]
    ordered += sorted(set(by_method) - set(METHOD_ORDER))

    header = ["method", "acc_df", "acc_dt", "acc_dr", "mia", "avg_gap"]

    def cells(method):
        r = by_method[method]
        out = [method]
        for key in header[1:]:
            try:
                out.append(fmt2(_metric(r, key)))
            except ValueError:
                out.append("-")
        return out

    table_rows = [cells(m) for m in ordered]
    widths = [max(len(h), *(len(r[i]) for r in table_rows)) if table_rows else len(h)
              for i, h in enumerate(header)]
    lines = ["  ".join(h.ljust(w) for h, w in zip(header, widths))]
    lines += ["  ".join(c.ljust(w) for c, w in zip(r, widths)) for r in table_rows]
    text = "\n".join(lines) + "\n"

    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    writer.writerows(table_rows)
    return text, buf.getvalue()
