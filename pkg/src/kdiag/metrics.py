"""Classification metrics and the record type carrying per-step evaluation snapshots."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


@dataclass
class EvalRecord:
    """Per-subject evaluation trace: truth plus prediction snapshots.

    Snapshot index 0 is the initial-mask state, so there are episode length + 1
    snapshots. `probs_s` entries may be present even for healthy subjects (the
    severity head always runs); `g_s` is None when `g_d` is 0.
    """

    subject_id: int
    g_d: int
    g_s: int | None
    probs_d: list = field(default_factory=list)
    probs_s: list = field(default_factory=list)
    line_counts: list = field(default_factory=list)

    @property
    def n_snapshots(self) -> int:
        return len(self.probs_d)


def balanced_accuracy(labels, predictions) -> float:
    """Mean per-class recall over the classes present in `labels`."""
    labels = np.asarray(labels, dtype=int)
    predictions = np.asarray(predictions, dtype=int)
    if labels.size == 0:
        raise ValueError("empty input")
    if labels.shape != predictions.shape:
        raise ValueError("labels and predictions must have equal length")
    recalls = []
    for cls in np.unique(labels):
        members = labels == cls
        recalls.append(float(np.mean(predictions[members] == cls)))
    return float(np.mean(recalls))


def roc_auc(labels, scores) -> float:
    """Probability a random positive outranks a random negative, ties counting 1/2.

    Computed from midranks, which is equivalent to trapezoidal integration of
    the ROC curve.
    """
    labels = np.asarray(labels, dtype=int)
    scores = np.asarray(scores, dtype=float)
    if labels.shape != scores.shape:
        raise ValueError("labels and scores must have equal length")
    n_pos = int(np.sum(labels == 1))
    n_neg = int(np.sum(labels == 0))
    if n_pos == 0 or n_neg == 0:
        raise ValueError("roc_auc needs both classes present")
    ranks = _midranks(scores)
    u = float(ranks[labels == 1].sum()) - n_pos * (n_pos + 1) / 2.0
    return u / (n_pos * n_neg)


def _midranks(scores: np.ndarray) -> np.ndarray:
    """1-based ranks with ties assigned the mean rank of their group."""
    order = np.argsort(scores, kind="mergesort")
    ranks = np.empty(scores.size, dtype=float)
    i = 0
    while i < scores.size:
        j = i
        while j + 1 < scores.size and scores[order[j + 1]] == scores[order[i]]:
            j += 1
        ranks[order[i : j + 1]] = (i + j) / 2.0 + 1.0
        i = j + 1
    return ranks


def macro_f1(labels, predictions, n_classes: int) -> float:
    """Unweighted mean of per-class F1; a class absent from the batch contributes 0."""
    labels = np.asarray(labels, dtype=int)
    predictions = np.asarray(predictions, dtype=int)
    if labels.size == 0:
        raise ValueError("empty input")
    if labels.shape != predictions.shape:
        raise ValueError("labels and predictions must have equal length")
    f1s = []
    for cls in range(n_classes):
        tp = int(np.sum((predictions == cls) & (labels == cls)))
        fp = int(np.sum((predictions == cls) & (labels != cls)))
        fn = int(np.sum((predictions != cls) & (labels == cls)))
        denom = 2 * tp + fp + fn
        f1s.append(2 * tp / denom if denom else 0.0)
    return float(np.mean(f1s))


def pearson_corr(a, b) -> float:
    """Pearson product-moment correlation; rejects constant inputs."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.ndim != 1 or a.shape != b.shape or a.size < 2:
        raise ValueError("inputs must be equal-length 1D vectors of length >= 2")
    da = a - a.mean()
    db = b - b.mean()
    sa = float(da @ da)
    sb = float(db @ db)
    if sa == 0.0 or sb == 0.0:
        raise ValueError("pearson_corr undefined for constant input")
    return float((da @ db) / np.sqrt(sa * sb))


def three_class_truth(g_d: int, g_s: int | None) -> int:
    """Map (disease, severity) ground truth onto {0: no finding, 1: low, 2: high}."""
    if g_d == 0:
        return 0
    if g_s not in (0, 1):
        raise ValueError("diseased subject needs a severity label")
    return 1 + g_s


def three_class_prediction(probs_d, probs_s) -> int:
    """Predicted outcome class: no finding unless the disease head says diseased."""
    if int(np.argmax(probs_d)) == 0:
        return 0
    return 1 + int(np.argmax(probs_s))


def sequential_accuracy(records, step: int = -1) -> float:
    """Balanced accuracy over three-class trajectory outcomes at one snapshot.

    A record counts as correct only when the disease call is right and, for
    diseased subjects, the severity call is right as well.
    """
    if not records:
        raise ValueError("empty input")
    truths = [three_class_truth(r.g_d, r.g_s) for r in records]
    preds = [three_class_prediction(r.probs_d[step], r.probs_s[step]) for r in records]
    return balanced_accuracy(truths, preds)


def sequential_auc(records, step: int = -1) -> float:
    """Macro one-vs-rest AUC over the three-class outcome.

    Scores per class are (p_no_finding, p_diseased * p_low, p_diseased * p_high);
    classes with no positives or no negatives at this snapshot are skipped.
    """
    if not records:
        raise ValueError("empty input")
    truths = np.array([three_class_truth(r.g_d, r.g_s) for r in records])
    scores = np.array(
        [
            (
                r.probs_d[step][0],
                r.probs_d[step][1] * r.probs_s[step][0],
                r.probs_d[step][1] * r.probs_s[step][1],
            )
            for r in records
        ]
    )
    aucs = []
    for cls in range(3):
        members = (truths == cls).astype(int)
        if 0 < members.sum() < members.size:
            aucs.append(roc_auc(members, scores[:, cls]))
    if not aucs:
        raise ValueError("no class with both positives and negatives present")
    return float(np.mean(aucs))
