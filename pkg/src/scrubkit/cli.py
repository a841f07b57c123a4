"""Command-line orchestration: train, unlearn, eval, ablate, table.

Every command is replayable: configs plus seeds fully determine checkpoints
and reports byte-for-byte, except wall-clock fields which live in each
report's isolated "timing" block. Exit codes: 0 success, 2 config error,
3 numeric divergence, 4 I/O error.
"""

import argparse
import hashlib
import json
import sys
import time
from dataclasses import replace
from pathlib import Path

from . import baselines, evaluate, sensitivity
from . import repair as repair_mod
from . import trim as trim_mod
from ._kernels import active_backend
from .baselines import BaselineConfig
from .checkpoint import CheckpointError, load_checkpoint, save_checkpoint
from .config import (ConfigError, build_datasets, build_network, build_split,
                     canonical_json, load_config)
from .data import IdxError, subsample_forget
from .evaluate import MetricsReport
from .repair import RepairConfig
from .training import DivergenceError, sgd_train

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_DIVERGED = 3
EXIT_IO = 4


def _sha256_file(path):
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def _write_json(path, obj):
    Path(path).write_text(canonical_json(obj), encoding="utf-8")


def _read_json(path):
    with open(path, "r", encoding="utf-8") as f:
        return json.load(f)


def _load_matching_checkpoint(cfg, checkpoint_path):
    spec, params = load_checkpoint(checkpoint_path)
    if spec != cfg.model:
        raise ConfigError(
            f"checkpoint {checkpoint_path} holds {spec}, config wants {cfg.model}")
    return params


def _baseline_config(cfg):
    base = cfg.unlearn.baseline or {}
    try:
        return BaselineConfig(
            cfg.unlearn.method,
            epochs=int(base.get("epochs", cfg.train.epochs)),
            learning_rate=float(base.get("learning_rate", cfg.train.learning_rate)),
            batch_size=int(base.get("batch_size", cfg.train.batch_size)),
            seed=int(base.get("seed", cfg.train.seed)),
            lr_decay=float(base.get("lr_decay", cfg.train.lr_decay)),
        )
    except ValueError as e:
        raise ConfigError(f"unlearn.baseline: {e}") from e


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------

def run_train(cfg, out_dir):
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    train_ds, test_ds = build_datasets(cfg.dataset)
    net = build_network(cfg, train_ds)

    t0 = time.perf_counter()
    run = sgd_train(net, net.init_params(), train_ds.inputs, train_ds.labels, cfg.train)
    seconds = time.perf_counter() - t0

    ckpt_path = out_dir / "model.ckpt"
    save_checkpoint(ckpt_path, cfg.model, run.params)
    report = {
        "command": "train",
        "backend": active_backend(),
        "config_hash": cfg.config_hash(),
        "checkpoint": {"path": ckpt_path.name, "sha256": _sha256_file(ckpt_path)},
        "dataset": {
            "name": train_ds.name,
            "train_size": len(train_ds),
            "test_size": len(test_ds),
            "class_count": train_ds.class_count,
        },
        "final_train_accuracy": 100.0 * net.accuracy(run.params, train_ds.inputs, train_ds.labels),
        "epoch_losses": run.epoch_losses,
        "timing": {"train_seconds": seconds},
    }
    _write_json(out_dir / "train_report.json", report)
    return report


def run_scissorhands(net, params, train_ds, split, u):
    """Trim + repair. Returns (scrubbed params, details dict)."""
    subset = subsample_forget(split, u.trim_subset_ratio, u.seed)
    saliency = sensitivity.approx_scores(
        net, params, train_ds.inputs[subset], train_ds.labels[subset])
    if u.per_layer:
        plan = trim_mod.rank_top_k_per_layer(
            saliency.scores, u.k, net, u.init_strategy, u.seed, signed=u.signed_ranking)
    else:
        exclude = None if u.trim_biases else net.is_bias
        plan = trim_mod.rank_top_k(
            saliency.scores, u.k, u.init_strategy, u.seed,
            signed=u.signed_ranking, exclude=exclude)
    trimmed = trim_mod.apply_trim(params, plan, net)

    retain = train_ds.take(split.retain_indices)
    forget = train_ds.take(split.forget_indices)
    rcfg = RepairConfig(
        balance=u.balance, learning_rate=u.learning_rate, epochs=u.epochs,
        batch_size=u.batch_size, seed=u.seed, use_projection=u.use_projection)
    scrubbed, trace = repair_mod.repair(
        net, trimmed, retain.inputs, retain.labels, forget.inputs, forget.labels, rcfg)
    details = {
        "trim_subset": subset.tolist(),
        "trim_plan": plan.to_dict(),
        "repair_trace": [s.to_dict() for s in trace],
    }
    return scrubbed, details


def run_unlearn(cfg, checkpoint_path, out_dir):
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    params = _load_matching_checkpoint(cfg, checkpoint_path)
    train_ds, test_ds = build_datasets(cfg.dataset)
    net = build_network(cfg, train_ds)
    split = build_split(cfg, train_ds)
    u = cfg.unlearn

    flags = {
        "checkpoint_ignored": u.method == "retrain",
        "diverged": False,
    }
    details = {}
    t0 = time.perf_counter()
    if u.method == "scissorhands":
        flags["use_projection"] = u.use_projection
        scrubbed, details = run_scissorhands(net, params, train_ds, split, u)
    else:
        bcfg = _baseline_config(cfg)
        if u.method == "retrain":
            run = baselines.retrain(net, train_ds, split, bcfg)
        elif u.method == "finetune":
            run = baselines.finetune(net, params, train_ds, split, bcfg)
        else:
            run = baselines.gradient_ascent(net, params, train_ds, split, bcfg)
        scrubbed = run.params
        flags["diverged"] = run.diverged
    seconds = time.perf_counter() - t0

    ckpt_path = out_dir / "scrubbed.ckpt"
    save_checkpoint(ckpt_path, cfg.model, scrubbed)
    report = {
        "command": "unlearn",
        "method": u.method,
        "backend": active_backend(),
        "config_hash": cfg.config_hash(),
        "input_checkpoint": {"path": str(checkpoint_path), "sha256": _sha256_file(checkpoint_path)},
        "output_checkpoint": {"path": ckpt_path.name, "sha256": _sha256_file(ckpt_path)},
        "split": split.to_dict(),
        "flags": flags,
        "timing": {"unlearn_seconds": seconds},
    }
    report.update(details)
    _write_json(out_dir / "unlearn_report.json", report)
    return report


def run_eval(cfg, checkpoint_path, reference_path=None, out_dir=None):
    params = _load_matching_checkpoint(cfg, checkpoint_path)
    train_ds, test_ds = build_datasets(cfg.dataset)
    net = build_network(cfg, train_ds)
    split = build_split(cfg, train_ds)

    t0 = time.perf_counter()
    acc_df, acc_dr, acc_dt = evaluate.split_accuracies(net, params, train_ds, split, test_ds)
    metrics = MetricsReport(acc_df=acc_df, acc_dr=acc_dr, acc_dt=acc_dt)
    if cfg.eval.mia:
        mia = evaluate.mia_score(net, params, train_ds, split, test_ds, cfg.eval.mia_seed)
        metrics.mia = mia.mean_prob
        metrics.mia_threshold_frac = mia.threshold_frac
        metrics.mia_degenerate = mia.degenerate

    reference = reference_path or cfg.eval.reference_report
    if cfg.eval.avg_gap and reference is None:
        raise ConfigError("eval.avg_gap requested but no reference report given")
    if reference is not None:
        ref_metrics = _read_json(reference).get("metrics", {})
        metrics.avg_gap = evaluate.avg_gap(metrics.to_dict(), ref_metrics)

    if cfg.eval.rte_unlearn_report and cfg.eval.rte_retrain_report:
        t_unlearn = _read_json(cfg.eval.rte_unlearn_report)["timing"]["unlearn_seconds"]
        t_retrain = _read_json(cfg.eval.rte_retrain_report)["timing"]["unlearn_seconds"]
        metrics.rte = evaluate.rte(t_unlearn, t_retrain)

    if cfg.eval.relearn is not None:
        r = cfg.eval.relearn
        epochs, exceeded = evaluate.relearn_time(
            net, params, train_ds, split,
            target_acc_df=float(r["target_acc_df"]),
            lr=float(r["learning_rate"]),
            cap=int(r["cap"]),
            batch_size=int(r.get("batch_size", cfg.train.batch_size)),
            seed=int(r.get("seed", cfg.train.seed)),
        )
        metrics.relearn_epochs = epochs
        metrics.relearn_exceeded = exceeded
    seconds = time.perf_counter() - t0

    report = {
        "command": "eval",
        "backend": active_backend(),
        "config_hash": cfg.config_hash(),
        "checkpoint": {"path": str(checkpoint_path), "sha256": _sha256_file(checkpoint_path)},
        "metrics": metrics.to_dict(),
        "reference": reference,
        "timing": {"eval_seconds": seconds},
    }
    if out_dir is not None:
        out_dir = Path(out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        _write_json(out_dir / "eval_report.json", report)
    return report


ABLATE_AXES = ("k", "lambda", "p", "init", "projection")


def _parse_axis_values(axis, values):
    parsed = []
    for raw in values:
        raw = raw.strip()
        if axis == "k":
            v = float(raw)
            if not 0.0 <= v < 100.0:
                raise ConfigError(f"ablate: k value {raw} out of [0, 100)")
        elif axis == "lambda":
            v = float(raw)
            if v < 0:
                raise ConfigError(f"ablate: lambda value {raw} must be non-negative")
        elif axis == "p":
            v = float(raw)
            if not 0.0 < v <= 1.0:
                raise ConfigError(f"ablate: p value {raw} out of (0, 1]")
        elif axis == "init":
            if raw not in trim_mod.INIT_STRATEGIES:
                raise ConfigError(f"ablate: unknown init strategy {raw!r}")
            v = raw
        else:  # projection
            if raw not in ("on", "off"):
                raise ConfigError(f"ablate: projection value must be on/off, got {raw!r}")
            v = raw
        parsed.append(v)
    return parsed


def _override_axis(u, axis, value):
    u = replace(u, method="scissorhands")
    if axis == "k":
        return replace(u, k=value)
    if axis == "lambda":
        return replace(u, balance=value)
    if axis == "p":
        return replace(u, trim_subset_ratio=value)
    if axis == "init":
        return replace(u, init_strategy=value)
    return replace(u, use_projection=value == "on")


def run_ablate(cfg, axis, values, out_dir):
    if axis not in ABLATE_AXES:
        raise ConfigError(f"ablate: unknown axis {axis!r} (choose from {', '.join(ABLATE_AXES)})")
    values = _parse_axis_values(axis, values)
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    train_ds, test_ds = build_datasets(cfg.dataset)
    net = build_network(cfg, train_ds)
    split = build_split(cfg, train_ds)

    base_run = sgd_train(net, net.init_params(), train_ds.inputs, train_ds.labels, cfg.train)
    params_orig = base_run.params

    retrain_cfg = BaselineConfig("retrain", cfg.train.epochs, cfg.train.learning_rate,
                                 cfg.train.batch_size, cfg.train.seed, cfg.train.lr_decay)
    t0 = time.perf_counter()
    retrain_run = baselines.retrain(net, train_ds, split, retrain_cfg)
    retrain_seconds = time.perf_counter() - t0
    ref_df, ref_dr, ref_dt = evaluate.split_accuracies(
        net, retrain_run.params, train_ds, split, test_ds)
    ref = MetricsReport(acc_df=ref_df, acc_dr=ref_dr, acc_dt=ref_dt)
    if cfg.eval.mia:
        mia = evaluate.mia_score(net, retrain_run.params, train_ds, split, test_ds,
                                 cfg.eval.mia_seed)
        ref.mia = mia.mean_prob

    rows = []
    for value in values:
        u = _override_axis(cfg.unlearn, axis, value)
        t0 = time.perf_counter()
        scrubbed, details = run_scissorhands(net, params_orig, train_ds, split, u)
        unlearn_seconds = time.perf_counter() - t0

        run_dir = out_dir / f"run_{axis}_{value}"
        run_dir.mkdir(exist_ok=True)
        save_checkpoint(run_dir / "scrubbed.ckpt", cfg.model, scrubbed)
        run_report = {
            "axis": axis,
            "value": value,
            "flags": {"use_projection": u.use_projection},
            "split": split.to_dict(),
            "timing": {"unlearn_seconds": unlearn_seconds},
        }
        run_report.update(details)
        _write_json(run_dir / "unlearn_report.json", run_report)

        acc_df, acc_dr, acc_dt = evaluate.split_accuracies(net, scrubbed, train_ds, split, test_ds)
        row = {
            "value": value,
            "projection": "on" if u.use_projection else "off",
            "acc_df": acc_df,
            "acc_dr": acc_dr,
            "acc_dt": acc_dt,
        }
        if cfg.eval.mia:
            mia = evaluate.mia_score(net, scrubbed, train_ds, split, test_ds, cfg.eval.mia_seed)
            row["mia"] = mia.mean_prob
            row["avg_gap"] = evaluate.avg_gap(row, ref)
        row["rte"] = evaluate.rte(unlearn_seconds, retrain_seconds)
        rows.append(row)

    columns = ["value", "projection", "acc_df", "acc_dr", "acc_dt"]
    if cfg.eval.mia:
        columns += ["mia", "avg_gap"]
    columns.append("rte")
    csv_lines = [",".join(columns)]
    csv_lines += [",".join(str(row[c]) for c in columns) for row in rows]
    (out_dir / "sweep.csv").write_text("\n".join(csv_lines) + "\n", encoding="utf-8")

    report = {
        "command": "ablate",
        "axis": axis,
        "values": values,
        "backend": active_backend(),
        "config_hash": cfg.config_hash(),
        "reference_metrics": ref.to_dict(),
        "rows": rows,
        "timing": {"retrain_seconds": retrain_seconds},
    }
    _write_json(out_dir / "sweep_report.json", report)
    return report


def run_table(report_specs, out_prefix=None):
    rows = []
    for spec in report_specs:
        if "=" not in spec:
            raise ConfigError(f"table: expected method=path, got {spec!r}")
        method, path = spec.split("=", 1)
        rows.append((method, _read_json(path).get("metrics", {})))
    text, csv_text = evaluate.comparison_table(rows)
    if out_prefix is not None:
        Path(str(out_prefix) + ".txt").write_text(text, encoding="utf-8")
        Path(str(out_prefix) + ".csv").write_text(csv_text, encoding="utf-8")
    return text


# ---------------------------------------------------------------------------
# entry point
# ---------------------------------------------------------------------------

def build_parser():
    parser = argparse.ArgumentParser(
        prog="scrubkit",
        description="Train, scrub, and evaluate small classifiers with forget/retain splits.")
    sub = parser.add_subparsers(dest="cmd", required=True)

    p = sub.add_parser("train", help="train the original model on the full dataset")
    p.add_argument("--config", required=True)
    p.add_argument("--out", required=True)

    p = sub.add_parser("unlearn", help="scrub a checkpoint with the configured method")
    p.add_argument("--config", required=True)
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--out", required=True)

    p = sub.add_parser("eval", help="compute the metric suite for a checkpoint")
    p.add_argument("--config", required=True)
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--reference", default=None, help="eval report of the retrained reference")
    p.add_argument("--out", default=None)

    p = sub.add_parser("ablate", help="sweep one unlearning hyperparameter")
    p.add_argument("--config", required=True)
    p.add_argument("--axis", required=True)
    p.add_argument("--values", required=True, help="comma-separated values")
    p.add_argument("--out", default=None)

    p = sub.add_parser("table", help="render a comparison table from eval reports")
    p.add_argument("--reports", required=True, nargs="+", help="method=eval_report.json pairs")
    p.add_argument("--out", default=None, help="prefix for .txt/.csv outputs")
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        if args.cmd == "train":
            report = run_train(load_config(args.config), args.out)
            print(f"trained: final train accuracy {evaluate.fmt2(report['final_train_accuracy'])}%")
        elif args.cmd == "unlearn":
            report = run_unlearn(load_config(args.config), args.checkpoint, args.out)
            print(f"scrubbed with {report['method']}: {report['output_checkpoint']['sha256'][:12]}")
        elif args.cmd == "eval":
            report = run_eval(load_config(args.config), args.checkpoint,
                              args.reference, args.out)
            print(canonical_json(report), end="")
        elif args.cmd == "ablate":
            out = args.out if args.out is not None else f"ablate_{args.axis}"
            report = run_ablate(load_config(args.config), args.axis,
                                args.values.split(","), out)
            print(f"ablate {args.axis}: {len(report['rows'])} runs -> {out}/sweep.csv")
        else:
            print(run_table(args.reports, args.out), end="")
    except ConfigError as e:
        print(f"config error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except DivergenceError as e:
        print(f"diverged: {e}", file=sys.stderr)
        return EXIT_DIVERGED
    except (CheckpointError, IdxError, OSError) as e:
        print(f"i/o error: {e}", file=sys.stderr)
        return EXIT_IO
    except ValueError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
