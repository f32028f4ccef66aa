"""Episode-level evaluation: per-step performance curves and sampling heatmaps."""

from __future__ import annotations

import numpy as np

from .metrics import (
    EvalRecord,
    balanced_accuracy,
    pearson_corr,
    roc_auc,
    sequential_accuracy,
    sequential_auc,
)
from .policy import PolicyBundle, episode_rng, run_inference_episode

CURVES_HEADER = (
    "step",
    "lines_acquired",
    "disease_bacc",
    "severity_bacc",
    "sequential_bacc",
    "disease_auc",
    "severity_auc",
    "seed",
)


def collect_records(
    bundle: PolicyBundle, subjects, seed: int, mode: str = "sample", stop: float | None = None
) -> list[EvalRecord]:
    """Run one inference episode per subject and snapshot every step.

    The episode RNG (initial mask and any sampling) is derived from
    (seed, subject index), so a record set is reproducible from its seed.
    """
    records = []
    for idx, subject in enumerate(subjects):
        rng = episode_rng(seed, idx)
        trace = run_inference_episode(
            subject, bundle, mode=mode, stop=stop, rng=rng, subject_index=idx
        )
        record = EvalRecord(idx, subject.g_d, subject.g_s)
        record.probs_d.append(trace.y_d0.probs)
        record.probs_s.append(trace.y_s0.probs)
        record.line_counts.append(trace.initial_mask.line_count)
        for step in trace.steps:
            record.probs_d.append(step.y_d.probs)
            record.probs_s.append(step.y_s.probs)
            record.line_counts.append(record.line_counts[-1] + 1)
        records.append(record)
    return records


def step_metrics(records: list[EvalRecord], step: int) -> dict:
    """All five curve metrics at one snapshot index."""
    d_true = [r.g_d for r in records]
    d_pred = [int(np.argmax(r.probs_d[step])) for r in records]
    d_score = [float(r.probs_d[step][1]) for r in records]
    diseased = [r for r in records if r.g_d == 1]
    s_true = [r.g_s for r in diseased]
    s_pred = [int(np.argmax(r.probs_s[step])) for r in diseased]
    s_score = [float(r.probs_s[step][1]) for r in diseased]
    return {
        "disease_bacc": balanced_accuracy(d_true, d_pred),
        "severity_bacc": balanced_accuracy(s_true, s_pred),
        "sequential_bacc": sequential_accuracy(records, step),
        "disease_auc": roc_auc(d_true, d_score),
        "severity_auc": roc_auc(s_true, s_score),
    }


def per_step_curves(
    bundle: PolicyBundle, subjects, budget: int, seeds, mode: str = "sample"
) -> list[dict]:
    """Per-seed metric rows for steps 0..budget (step 0 is the initial mask).

    Returns one row per (seed, step) with the columns of CURVES_HEADER; seed
    means are left to the consumer so per-seed values stay available.
    """
    run_bundle = bundle if bundle.budget == budget else _with_budget(bundle, budget)
    rows = []
    for seed in seeds:
        records = collect_records(run_bundle, subjects, seed, mode=mode)
        for step in range(budget + 1):
            row = {"step": step, "lines_acquired": bundle.initial_lines + step, "seed": seed}
            row.update(step_metrics(records, step))
            rows.append(row)
    return rows


def _with_budget(bundle: PolicyBundle, budget: int) -> PolicyBundle:
    return PolicyBundle(
        policy=bundle.policy,
        f_d=bundle.f_d,
        f_s=bundle.f_s,
        initial_lines=bundle.initial_lines,
        budget=budget,
        pool=bundle.pool,
        input_kind=bundle.input_kind,
    )


def curve_summary(rows: list[dict]) -> dict:
    """Mean and standard deviation over seeds of the final-step metrics."""
    final_step = max(r["step"] for r in rows)
    finals = [r for r in rows if r["step"] == final_step]
    summary = {"step": final_step, "lines_acquired": finals[0]["lines_acquired"]}
    for key in ("disease_bacc", "severity_bacc", "sequential_bacc", "disease_auc", "severity_auc"):
        values = np.array([r[key] for r in finals])
        summary[f"{key}_mean"] = float(values.mean())
        summary[f"{key}_std"] = float(values.std())
    return summary


def trajectory_heatmap(
    bundle: PolicyBundle, subjects, budget: int, seed: int = 1, mode: str = "sample"
) -> np.ndarray:
    """Mean policy distribution per step, a (budget x cols) matrix with unit rows."""
    run_bundle = bundle if bundle.budget == budget else _with_budget(bundle, budget)
    snapshots = None
    for idx, subject in enumerate(subjects):
        rng = episode_rng(seed, idx)
        trace = run_inference_episode(subject, run_bundle, mode=mode, rng=rng, subject_index=idx)
        if len(trace.steps) != budget:
            raise ValueError("episode ended before the budget; heatmap needs full episodes")
        probs = np.stack([step.probs for step in trace.steps])
        snapshots = probs if snapshots is None else snapshots + probs
    if snapshots is None:
        raise ValueError("no subjects supplied")
    return snapshots / len(subjects)


def stepwise_correlation(heatmap_a: np.ndarray, heatmap_b: np.ndarray) -> list[tuple[int, float]]:
    """Pearson correlation between matching step rows of two heatmaps."""
    a = np.asarray(heatmap_a, dtype=float)
    b = np.asarray(heatmap_b, dtype=float)
    if a.ndim != 2 or b.ndim != 2 or a.shape[1] != b.shape[1]:
        raise ValueError("heatmaps must be 2D with matching column counts")
    steps = min(a.shape[0], b.shape[0])
    return [(t, pearson_corr(a[t], b[t])) for t in range(steps)]
