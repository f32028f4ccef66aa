"""Benchmark policies that are not a plain reward swap.

The varying-parameter benchmark trains two policies, one per objective, and
acts through the elementwise mean of their distributions; the severity policy
only ever learns from diseased subjects. The random baseline acquires uniform
unsampled lines with no training at all.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .classifiers import MlpParams, TrainResult, extract_input, mlp_forward
from .kspace import CartesianMask, add_line, apply_mask, init_random_mask
from .policy import (
    AcquisitionState,
    EpisodeTrace,
    LineDistribution,
    PolicyConfig,
    PolicyParams,
    TraceStep,
    _STREAM_EPISODE,
    _accumulate,
    _validation_metric,
    _zero_grad,
    evaluate_candidates,
    grad_from_candidate_rewards,
    greedy_topq,
    init_policy,
    policy_forward,
    _reward_weights,
)
from .rewards import StepReward


@dataclass(eq=False)
class DualPolicyParams:
    """Disease and severity policies acting through their averaged distribution."""

    disease_policy: PolicyParams
    severity_policy: PolicyParams

    def __post_init__(self):
        same = (
            self.disease_policy.d_in == self.severity_policy.d_in
            and self.disease_policy.hidden == self.severity_policy.hidden
            and self.disease_policy.n_out == self.severity_policy.n_out
        )
        if not same:
            raise ValueError("sub-policies must share input and output dimensions")

    @property
    def d_in(self) -> int:
        return self.disease_policy.d_in

    @property
    def n_out(self) -> int:
        return self.disease_policy.n_out

    def distribution(self, features, mask: CartesianMask) -> LineDistribution:
        return varying_parameter_forward(self, features, mask)


def varying_parameter_forward(dual: DualPolicyParams, features, mask: CartesianMask) -> LineDistribution:
    """Elementwise mean of the two masked softmax distributions.

    Both summands already sum to one over the same unsampled support, so the
    mean is a valid distribution without renormalization.
    """
    p_d = policy_forward(dual.disease_policy, features, mask).probs
    p_s = policy_forward(dual.severity_policy, features, mask).probs
    return LineDistribution(probs=0.5 * (p_d + p_s), mask=mask)


def random_policy_step(mask: CartesianMask, rng: np.random.Generator) -> int:
    """Uniformly choose one still-unsampled line."""
    unsampled = mask.unsampled_indices()
    if unsampled.size == 0:
        raise ValueError("all lines are sampled")
    return int(rng.choice(unsampled))


def run_training_episode_dual(
    subject,
    dual: DualPolicyParams,
    f_d: MlpParams,
    f_s: MlpParams,
    sched,
    q: int,
    rng: np.random.Generator,
    *,
    weights_d=(1.0, 1.0),
    weights_s=(1.0, 1.0),
    pool: int = 2,
    center_fraction: float = 0.0,
    subject_index: int | None = None,
) -> tuple[EpisodeTrace, MlpParams, MlpParams]:
    """Joint episode driven by the averaged distribution.

    Candidates come from the averaged distribution's top q; each sub-policy
    takes the log-probability gradient under its own distribution, the disease
    stream on every subject and the severity stream only when the subject is
    diseased. No step-dependent weighting is applied.
    """
    rows, cols = subject.kspace.shape
    mask = init_random_mask(cols, sched.L, center_fraction, rng)
    initial_lines = mask.line_count
    current = apply_mask(subject.kspace, mask)
    x = extract_input(current, pool)
    y_d = mlp_forward(f_d, x)
    y_s = mlp_forward(f_s, x)
    trace = EpisodeTrace(subject_index=subject_index, initial_mask=mask, y_d0=y_d, y_s0=y_s)
    grad_disease = _zero_grad(dual.disease_policy)
    grad_severity = _zero_grad(dual.severity_policy)
    for t in range(sched.T):
        features = np.concatenate([y_d.hidden, y_s.hidden])
        state = AcquisitionState(current, t, features, y_d, y_s, initial_lines)
        dist = varying_parameter_forward(dual, features, current.mask)
        candidates = greedy_topq(dist, q)
        # One hypothetical pass per candidate; the combined kind already
        # carries the plain disease reward and the truth-gated severity reward.
        rewards = evaluate_candidates(
            state, candidates, subject, f_d, f_s, sched,
            weights_d=weights_d, weights_s=weights_s, pool=pool, kind="combined",
        )
        _accumulate(
            grad_disease,
            grad_from_candidate_rewards(
                dual.disease_policy, features, current.mask, candidates,
                [sr.r_d for sr in rewards],
            ),
        )
        if subject.g_d == 1:
            _accumulate(
                grad_severity,
                grad_from_candidate_rewards(
                    dual.severity_policy, features, current.mask, candidates,
                    [sr.r_s for sr in rewards],
                ),
            )
        slot = int(rng.integers(q))
        line = candidates[slot]
        current = add_line(current, subject.kspace, line)
        x = extract_input(current, pool)
        y_d = mlp_forward(f_d, x)
        y_s = mlp_forward(f_s, x)
        combined = tuple(StepReward(sr.r_d, sr.r_s, sr.r_d + sr.r_s) for sr in rewards)
        trace.steps.append(
            TraceStep(
                t=t,
                line=line,
                observed=subject.kspace[:, line].copy(),
                candidates=tuple(candidates),
                candidate_rewards=combined,
                probs=dist.probs.copy(),
                reward=combined[slot],
                y_d=y_d,
                y_s=y_s,
            )
        )
    return trace, grad_disease, grad_severity


def train_varying_parameter(
    train_subjects, val_subjects, f_d: MlpParams, f_s: MlpParams, cfg: PolicyConfig
) -> TrainResult:
    """Jointly train the two sub-policies with per-step updates on shared episodes."""
    if f_d is None or f_s is None:
        raise ValueError("the varying-parameter variant needs both classifiers")
    rows, cols = train_subjects[0].kspace.shape
    d_in = 2 * f_d.hidden
    dual = DualPolicyParams(
        init_policy(d_in, cfg.hidden, cols, cfg.seed),
        init_policy(d_in, cfg.hidden, cols, cfg.seed + 1),
    )
    weights_d, weights_s = _reward_weights(train_subjects)
    sched = cfg.schedule()
    rng = np.random.default_rng(np.random.SeedSequence([cfg.seed, _STREAM_EPISODE]))
    result = TrainResult(
        params=DualPolicyParams(dual.disease_policy.copy(), dual.severity_policy.copy())
    )
    n = len(train_subjects)
    for epoch in range(cfg.epochs):
        boundary = (2 * cfg.epochs) // 3
        lr = cfg.lr * (cfg.lr_decay if cfg.epochs > 1 and epoch >= boundary else 1.0)
        order = rng.permutation(n)
        for start in range(0, n, cfg.batch):
            batch = np.sort(order[start : start + cfg.batch])
            gd = _zero_grad(dual.disease_policy)
            gs = _zero_grad(dual.severity_policy)
            for i in batch:
                _, g_dis, g_sev = run_training_episode_dual(
                    train_subjects[i], dual, f_d, f_s, sched, cfg.q, rng,
                    weights_d=weights_d, weights_s=weights_s, pool=cfg.pool,
                    center_fraction=cfg.center_fraction, subject_index=int(i),
                )
                _accumulate(gd, g_dis)
                _accumulate(gs, g_sev)
            scale = lr / batch.size
            for params, grad in ((dual.disease_policy, gd), (dual.severity_policy, gs)):
                params.w1 += scale * grad.w1
                params.b1 += scale * grad.b1
                params.w2 += scale * grad.w2
                params.b2 += scale * grad.b2
        metric = _validation_metric(dual, f_d, f_s, val_subjects, cfg, "varying")
        result.history.append({"epoch": epoch, "val_metric": metric})
        if result.best_epoch < 0 or metric > result.best_metric:
            result.best_epoch = epoch
            result.best_metric = metric
            result.params = DualPolicyParams(
                dual.disease_policy.copy(), dual.severity_policy.copy()
            )
    return result
