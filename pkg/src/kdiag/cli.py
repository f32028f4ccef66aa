"""Command-line surface for reproducible experiments.

Subcommands cover the full pipeline: gen-data, train-cls, train-policy, eval,
trajectory, and correlate. Exit codes: 0 success, 2 usage or config error,
3 I/O error, 4 artifact incompatibility (bad magic, truncation, dimension
mismatch, missing checkpoint, unusable subject subset). Every command is
deterministic given --seed and its config. All CSV floats carry 6 significant
digits. Each CSV gets a rendered .png figure beside it; KDIAG_OUT_DIR, when
set, re-roots relative output paths.
"""

from __future__ import annotations

import argparse
import os
import sys
from pathlib import Path

import numpy as np

from . import checkpoint as ckpt
from . import evaluation, figures, phantom
from .classifiers import class_weights_from_labels, finetune_severity, train_disease
from .config import ExperimentConfig, load_experiment_config
from .errors import ArtifactError, ConfigError
from .policy import VARIANTS, PolicyBundle, train_policy
from .variants import DualPolicyParams

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_IO = 3
EXIT_ARTIFACT = 4


def fmt(value) -> str:
    """CSV float formatting: 6 significant digits."""
    if isinstance(value, float):
        return format(value, ".6g")
    return str(value)


def _resolve_out(path) -> Path:
    path = Path(path)
    root = os.environ.get("KDIAG_OUT_DIR")
    if root and not path.is_absolute():
        return Path(root) / path
    return path


def _write_csv(path: Path, header, rows) -> None:
    lines = [",".join(header)]
    for row in rows:
        lines.append(",".join(fmt(row[key]) for key in header))
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


def _figure_path(csv_path: Path) -> Path:
    return csv_path.with_suffix(".png")


def _check_workers(args) -> None:
    # A cap on internal parallelism; execution is sequential either way, so
    # any cap >= 1 is honored and never changes numeric output.
    workers = getattr(args, "workers", None)
    if workers is not None and workers < 1:
        raise ConfigError("--workers must be at least 1")


def _load_config(args) -> ExperimentConfig:
    _check_workers(args)
    overrides = {}
    if getattr(args, "seed", None) is not None:
        overrides["data.rng_seed"] = args.seed
        overrides["classifier.seed"] = args.seed
        overrides["policy.seed"] = args.seed
        overrides["eval.seed"] = args.seed
    if getattr(args, "variant", None) is not None:
        overrides["policy.variant"] = args.variant
    if getattr(args, "seeds", None) is not None:
        overrides["eval.seeds"] = args.seeds
    if getattr(args, "mode", None) is not None:
        overrides["eval.mode"] = args.mode
    config_path = getattr(args, "config", None)
    if config_path is not None and not Path(config_path).exists():
        raise ConfigError(f"config file not found: {config_path}")
    return load_experiment_config(config_path, overrides)


def _load_classifier(path, rows, cols, pool):
    path = Path(path)
    if not path.exists():
        raise ArtifactError(f"checkpoint not found: {path}")
    params, meta = ckpt.load_checkpoint(path)
    if meta.get("kind") != "classifier":
        raise ArtifactError(f"{path}: expected a classifier checkpoint, got {meta.get('kind')!r}")
    expected = (rows // pool) * (cols // pool)
    if params.d_in != expected:
        raise ArtifactError(
            f"{path}: classifier expects {params.d_in} inputs, data yields {expected}"
        )
    return params, meta


def _dims_from_manifest(manifest_path) -> tuple[int, int]:
    manifest = phantom.read_manifest(manifest_path)
    rows = int(manifest.config.get("rows", 32))
    cols = int(manifest.config.get("cols", 32))
    return rows, cols


def cmd_gen_data(args) -> int:
    cfg = _load_config(args)
    out_dir = _resolve_out(args.out)
    if not out_dir.parent.exists():
        raise OSError(f"parent directory does not exist: {out_dir.parent}")
    manifest = phantom.generate_dataset(cfg.data, out_dir)
    counts = {split: {0: 0, 1: 0, 2: 0} for split in phantom.SPLITS}
    manifest_path = Path(out_dir) / "manifest.txt"
    for split, rel in manifest.entries:
        subject = phantom.read_subject(Path(out_dir) / rel)
        counts[split][subject.outcome] += 1
    print(f"dataset written to {out_dir}")
    print("split      no_finding  diseased_low  diseased_high")
    for split in phantom.SPLITS:
        c = counts[split]
        print(f"{split:<10} {c[0]:>10}  {c[1]:>12}  {c[2]:>13}")
    print(f"manifest: {manifest_path}")
    return EXIT_OK


def cmd_train_cls(args) -> int:
    cfg = _load_config(args)
    if args.task == "severity" and args.init is None:
        raise ConfigError("--task severity requires --init with a disease checkpoint")
    train_subjects = phantom.load_split(args.manifest, "train")
    val_subjects = phantom.load_split(args.manifest, "val")
    if args.task == "disease":
        result = train_disease(train_subjects, val_subjects, cfg.classifier)
        labels = [s.g_d for s in train_subjects]
    else:
        init_path = Path(args.init)
        if not init_path.exists():
            raise ArtifactError(f"checkpoint not found: {init_path}")
        init_params, _ = ckpt.load_checkpoint(init_path)
        train_diseased = [s for s in train_subjects if s.g_d == 1]
        val_diseased = [s for s in val_subjects if s.g_d == 1]
        if not train_diseased or not val_diseased:
            raise ArtifactError("no diseased subjects available for severity fine-tuning")
        result = finetune_severity(init_params, train_diseased, val_diseased, cfg.classifier)
        labels = [s.g_s for s in train_diseased]
    weights = class_weights_from_labels(labels) if len(set(labels)) == 2 else np.ones(2)
    out = _resolve_out(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    ckpt.save_checkpoint(
        out,
        result.params,
        "classifier",
        {
            "task": args.task,
            "seed": cfg.classifier.seed,
            "pool": cfg.classifier.pool,
            "class_weights": [float(w) for w in weights],
            "config": vars(cfg.classifier),
            "best_epoch": result.best_epoch,
        },
    )
    log_path = out.with_name(out.stem + "_log.csv")
    _write_csv(log_path, ("epoch", "train_loss", "val_bacc"), result.history)
    best = f"{result.best_metric:.4f}" if result.history else "n/a"
    print(f"checkpoint: {out}")
    print(f"training log: {log_path}")
    print(f"best val balanced accuracy: {best} (epoch {result.best_epoch})")
    return EXIT_OK


def _needs_classifiers(variant: str) -> bool:
    return variant != "recon"


def cmd_train_policy(args) -> int:
    if args.variant not in VARIANTS:
        raise ConfigError(
            f"unknown variant {args.variant!r}; valid variants: {', '.join(VARIANTS)}"
        )
    cfg = _load_config(args)
    rows, cols = _dims_from_manifest(args.manifest)
    f_d = f_s = None
    if _needs_classifiers(args.variant):
        if args.cls_d is None or args.cls_s is None:
            raise ConfigError(f"variant {args.variant!r} requires --cls-d and --cls-s")
        f_d, _ = _load_classifier(args.cls_d, rows, cols, cfg.policy.pool)
        f_s, _ = _load_classifier(args.cls_s, rows, cols, cfg.policy.pool)
    train_subjects = phantom.load_split(args.manifest, "train")
    val_subjects = phantom.load_split(args.manifest, "val")
    result = train_policy(train_subjects, val_subjects, f_d, f_s, args.variant, cfg.policy)
    out = _resolve_out(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    meta = {
        "variant": args.variant,
        "seed": cfg.policy.seed,
        "pool": cfg.policy.pool,
        "input_kind": "magnitude" if args.variant == "recon" else "features",
        "initial_lines": cfg.policy.initial_lines,
        "budget": cfg.policy.steps,
        "config": vars(cfg.policy),
        "best_epoch": result.best_epoch,
    }
    if isinstance(result.params, DualPolicyParams):
        ckpt.save_dual_checkpoint(out, result.params, meta)
    else:
        ckpt.save_checkpoint(out, result.params, "policy", meta)
    log_path = out.with_name(out.stem + "_log.csv")
    _write_csv(log_path, ("epoch", "val_metric"), result.history)
    print(f"checkpoint: {out}")
    print(f"validation log: {log_path}")
    if result.history:
        print(f"best validation metric: {result.best_metric:.4f} (epoch {result.best_epoch})")
    return EXIT_OK


def _build_bundle(args, cfg: ExperimentConfig) -> PolicyBundle:
    rows, cols = _dims_from_manifest(args.manifest)
    policy, meta = ckpt.load_policy_artifact(Path(args.policy))
    pool = int(meta.get("pool", cfg.policy.pool))
    f_d, _ = _load_classifier(args.cls_d, rows, cols, pool)
    f_s, _ = _load_classifier(args.cls_s, rows, cols, pool)
    if f_d.hidden != f_s.hidden or f_d.d_in != f_s.d_in:
        raise ArtifactError("classifier checkpoints disagree on dimensions")
    input_kind = meta.get("input_kind", "features")
    expected = (rows // pool) * (cols // pool) if input_kind == "magnitude" else 2 * f_d.hidden
    if policy.d_in != expected:
        raise ArtifactError(
            f"policy expects {policy.d_in} inputs but the {input_kind} features have {expected}"
        )
    if policy.n_out != cols:
        raise ArtifactError(f"policy outputs {policy.n_out} lines but the data has {cols} columns")
    return PolicyBundle(
        policy=policy,
        f_d=f_d,
        f_s=f_s,
        initial_lines=int(meta.get("initial_lines", cfg.policy.initial_lines)),
        budget=int(meta.get("budget", cfg.policy.steps)),
        pool=pool,
        input_kind=input_kind,
    )


def cmd_eval(args) -> int:
    cfg = _load_config(args)
    bundle = _build_bundle(args, cfg)
    subjects = phantom.load_split(args.manifest, args.split)
    rows = evaluation.per_step_curves(
        bundle, subjects, bundle.budget, cfg.eval.seed_list(), mode=cfg.eval.mode
    )
    out = _resolve_out(args.out)
    _write_csv(out, evaluation.CURVES_HEADER, rows)
    figures.save_curves_figure(rows, _figure_path(out))
    summary = evaluation.curve_summary(rows)
    records = evaluation.collect_records(bundle, subjects, cfg.eval.seed, mode=cfg.eval.mode)
    seq_auc = evaluation.sequential_auc(records)
    print(f"curves: {out}")
    print(f"figure: {_figure_path(out)}")
    print(
        "final step {step} ({lines_acquired} lines), mean +/- std over seeds:".format(**summary)
    )
    for key in ("disease_bacc", "severity_bacc", "sequential_bacc", "disease_auc", "severity_auc"):
        print(f"  {key:<16} {summary[key + '_mean']:.4f} +/- {summary[key + '_std']:.4f}")
    print(f"  sequential_auc   {seq_auc:.4f} (seed {cfg.eval.seed})")
    return EXIT_OK


def cmd_trajectory(args) -> int:
    cfg = _load_config(args)
    bundle = _build_bundle(args, cfg)
    subjects = phantom.load_split(args.manifest, args.split)
    matrix = evaluation.trajectory_heatmap(
        bundle, subjects, bundle.budget, seed=cfg.eval.seed, mode=cfg.eval.mode
    )
    out = _resolve_out(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    lines = [",".join(str(i) for i in range(matrix.shape[1]))]
    for row in matrix:
        lines.append(",".join(fmt(float(v)) for v in row))
    out.write_text("\n".join(lines) + "\n", encoding="utf-8")
    figures.save_heatmap_figure(matrix, _figure_path(out))
    print(f"heatmap: {out}")
    print(f"figure: {_figure_path(out)}")
    return EXIT_OK


def _read_heatmap(path) -> np.ndarray:
    path = Path(path)
    if not path.exists():
        raise ArtifactError(f"trajectory file not found: {path}")
    lines = [l for l in path.read_text(encoding="utf-8").splitlines() if l.strip()]
    if len(lines) < 2:
        raise ArtifactError(f"{path}: expected a line-index row plus probability rows")
    try:
        rows = [np.array([float(v) for v in line.split(",")]) for line in lines[1:]]
    except ValueError as exc:
        raise ArtifactError(f"{path}: unparsable heatmap value ({exc})") from exc
    widths = {row.size for row in rows}
    if len(widths) != 1:
        raise ArtifactError(f"{path}: ragged heatmap rows")
    return np.stack(rows)


def cmd_correlate(args) -> int:
    a = _read_heatmap(args.traj_a)
    b = _read_heatmap(args.traj_b)
    if a.shape[1] != b.shape[1]:
        raise ArtifactError(
            f"trajectories disagree on line count: {a.shape[1]} vs {b.shape[1]}"
        )
    pairs = evaluation.stepwise_correlation(a, b)
    out = _resolve_out(args.out)
    _write_csv(out, ("step", "pearson_r"), [{"step": t, "pearson_r": r} for t, r in pairs])
    figures.save_correlation_figure(pairs, _figure_path(out))
    print(f"correlation: {out}")
    print(f"figure: {_figure_path(out)}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="kdiag",
        description="Active k-space sampling for sequential diagnosis: data, training, evaluation.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-data", help="generate a synthetic labeled dataset")
    p.add_argument("--config", help="experiment config file")
    p.add_argument("--out", required=True, help="dataset directory")
    p.add_argument("--seed", type=int, help="override the generator seed")
    p.set_defaults(func=cmd_gen_data)

    p = sub.add_parser("train-cls", help="train the disease or severity classifier")
    p.add_argument("--manifest", required=True)
    p.add_argument("--task", choices=("disease", "severity"), required=True)
    p.add_argument("--init", help="disease checkpoint to fine-tune from (severity only)")
    p.add_argument("--config")
    p.add_argument("--out", required=True, help="checkpoint path")
    p.add_argument("--seed", type=int)
    p.add_argument("--workers", type=int, help="cap on internal parallelism")
    p.set_defaults(func=cmd_train_cls)

    p = sub.add_parser("train-policy", help="train a sampling policy variant")
    p.add_argument("--variant", required=True)
    p.add_argument("--cls-d", dest="cls_d", help="disease classifier checkpoint")
    p.add_argument("--cls-s", dest="cls_s", help="severity classifier checkpoint")
    p.add_argument("--manifest", required=True)
    p.add_argument("--config")
    p.add_argument("--out", required=True, help="checkpoint path")
    p.add_argument("--seed", type=int)
    p.add_argument("--workers", type=int, help="cap on internal parallelism")
    p.set_defaults(func=cmd_train_policy)

    p = sub.add_parser("eval", help="per-step metric curves on a split")
    p.add_argument("--policy", required=True)
    p.add_argument("--cls-d", dest="cls_d", required=True)
    p.add_argument("--cls-s", dest="cls_s", required=True)
    p.add_argument("--manifest", required=True)
    p.add_argument("--split", default="test", choices=("train", "val", "test"))
    p.add_argument("--seeds", type=int, help="number of evaluation seeds")
    p.add_argument("--seed", type=int, help="base evaluation seed")
    p.add_argument("--mode", choices=("sample", "argmax"))
    p.add_argument("--config")
    p.add_argument("--out", required=True, help="curves CSV path")
    p.add_argument("--workers", type=int, help="cap on internal parallelism")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("trajectory", help="average sampling-probability heatmap")
    p.add_argument("--policy", required=True)
    p.add_argument("--cls-d", dest="cls_d", required=True)
    p.add_argument("--cls-s", dest="cls_s", required=True)
    p.add_argument("--manifest", required=True)
    p.add_argument("--split", default="test", choices=("train", "val", "test"))
    p.add_argument("--seed", type=int)
    p.add_argument("--mode", choices=("sample", "argmax"))
    p.add_argument("--config")
    p.add_argument("--out", required=True, help="heatmap CSV path")
    p.set_defaults(func=cmd_trajectory)

    p = sub.add_parser("correlate", help="per-step Pearson correlation of two heatmaps")
    p.add_argument("--traj-a", dest="traj_a", required=True)
    p.add_argument("--traj-b", dest="traj_b", required=True)
    p.add_argument("--out", required=True, help="correlation CSV path")
    p.set_defaults(func=cmd_correlate)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except ArtifactError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ARTIFACT
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO


def main_entry() -> None:
    sys.exit(main())


if __name__ == "__main__":
    main_entry()
