"""Reward functions for sampling-policy training.

Covers the per-step cross-entropy improvement and its cosine-interpolated
two-objective weighting with disease gating, plus the batch three-class F1
reward and the structural-similarity reward used by the benchmark policies.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .classifiers import weighted_ce
from .metrics import macro_f1, three_class_prediction

SSIM_WINDOW = 7


@dataclass(frozen=True)
class RewardSchedule:
    """Acquisition budget T, interpolation offset beta, and initial line count L.

    T = 0 is allowed as a degenerate budget (an episode that acquires
    nothing); the cosine weights are then undefined for every step.
    """

    T: int
    beta: float = 0.0
    L: int = 0

    def __post_init__(self):
        if self.T < 0:
            raise ValueError("T must be non-negative")
        if self.L < 0:
            raise ValueError("L must be non-negative")


@dataclass(frozen=True)
class StepReward:
    """Disease and severity components plus their weighted combination."""

    r_d: float
    r_s: float
    r: float


def ce_improvement(prev, next, label: int, class_weights) -> float:
    """Drop in weighted cross-entropy from `prev` to `next`; positive means improvement."""
    return weighted_ce(prev.probs, label, class_weights) - weighted_ce(
        next.probs, label, class_weights
    )


def cosine_weights(t: int, sched: RewardSchedule) -> tuple[float, float]:
    """Step-dependent objective weights (w_disease, w_severity).

    The severity weight follows a half-cosine ramp from ~0 at the first step to
    1 at the last, shifted by `beta`; the disease weight is its complement.
    """
    if not 0 <= t < sched.T:
        raise ValueError(f"step {t} out of range [0, {sched.T})")
    w_severity = 0.5 * (1.0 - math.cos(math.pi * (t + 1) / sched.T + math.pi * sched.beta))
    return 1.0 - w_severity, w_severity


def combined_step_reward(
    r_d: float, r_s: float, g_d: int, t: int, sched: RewardSchedule
) -> StepReward:
    """Weighted two-objective reward with the severity term gated off for healthy subjects."""
    w_d, w_s = cosine_weights(t, sched)
    effective_r_s = 0.0 if g_d == 0 else r_s
    return StepReward(r_d, effective_r_s, w_d * r_d + w_s * effective_r_s)


def three_class_f1_reward(prev_predictions, next_predictions, labels) -> float:
    """Macro-F1 improvement of the batch three-class diagnosis.

    Each prediction entry is a (disease probs, severity probs) pair; labels are
    outcome classes in {0: no finding, 1: diseased low, 2: diseased high}. The
    resulting scalar applies to every subject in the batch.
    """
    labels = np.asarray(labels, dtype=int)
    if labels.size == 0:
        raise ValueError("empty batch")
    if len(prev_predictions) != labels.size or len(next_predictions) != labels.size:
        raise ValueError("predictions and labels must have equal length")
    prev_cls = [three_class_prediction(pd, ps) for pd, ps in prev_predictions]
    next_cls = [three_class_prediction(pd, ps) for pd, ps in next_predictions]
    return macro_f1(labels, next_cls, 3) - macro_f1(labels, prev_cls, 3)


def ssim(a, b) -> float:
    """Mean local structural similarity over sliding 7x7 uniform windows.

    Local moments are plain window averages (population variance). Stabilizing
    constants are C1 = (0.01 R)^2 and C2 = (0.03 R)^2 with R the joint value
    range of both images, floored at 1e-8.
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.shape != b.shape or a.ndim != 2:
        raise ValueError("inputs must be 2D matrices of equal shape")
    if min(a.shape) < SSIM_WINDOW:
        raise ValueError(f"images must be at least {SSIM_WINDOW}x{SSIM_WINDOW}")
    data_range = max(float(max(a.max(), b.max()) - min(a.min(), b.min())), 1e-8)
    c1 = (0.01 * data_range) ** 2
    c2 = (0.03 * data_range) ** 2

    wa = np.lib.stride_tricks.sliding_window_view(a, (SSIM_WINDOW, SSIM_WINDOW))
    wb = np.lib.stride_tricks.sliding_window_view(b, (SSIM_WINDOW, SSIM_WINDOW))
    mu_a = wa.mean(axis=(-2, -1))
    mu_b = wb.mean(axis=(-2, -1))
    var_a = (wa * wa).mean(axis=(-2, -1)) - mu_a * mu_a
    var_b = (wb * wb).mean(axis=(-2, -1)) - mu_b * mu_b
    cov = (wa * wb).mean(axis=(-2, -1)) - mu_a * mu_b
    ssim_map = ((2 * mu_a * mu_b + c1) * (2 * cov + c2)) / (
        (mu_a * mu_a + mu_b * mu_b + c1) * (var_a + var_b + c2)
    )
    return float(ssim_map.mean())
