"""Sampling policy over unsampled k-space lines and its policy-gradient training.

The policy is a small tanh MLP mapping the classifiers' concatenated feature
vector to one logit per k-space column, softmaxed over the still-unsampled
columns. Training follows a greedy-parallel score-function estimator: at every
step the q most probable candidate lines are each evaluated hypothetically,
their mean reward serves as the baseline, the gradient contribution is

    (1 / (q - 1)) * sum_i  grad log pi(candidate_i | features) * (r_i - mean r)

and one of the q candidates, chosen uniformly at random, is actually acquired.
During inference no parallel candidates are used; the policy samples (or
arg-maxes) one line per step.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .classifiers import (
    MlpParams,
    Prediction,
    TrainResult,
    backward_from_dlogits,
    class_weights_from_labels,
    extract_input,
    init_mlp,
    mlp_forward,
)
from .kspace import (
    CartesianMask,
    UndersampledKSpace,
    add_line,
    apply_mask,
    init_random_mask,
    zero_fill_magnitude,
)
from .metrics import EvalRecord, balanced_accuracy, sequential_accuracy
from .rewards import (
    RewardSchedule,
    StepReward,
    ce_improvement,
    combined_step_reward,
    ssim,
    three_class_f1_reward,
)

VARIANTS = ("weighted", "simulated", "varying", "recon", "random", "disease", "severity")
REWARD_KINDS = ("combined", "disease", "severity")

_STREAM_EPISODE = 23
_STREAM_VAL = 29
_STREAM_INIT_MASK = 31


@dataclass(eq=False)
class PolicyParams(MlpParams):
    """MLP policy parameters; output size equals the number of k-space columns."""

    def distribution(self, features, mask: CartesianMask) -> "LineDistribution":
        return policy_forward(self, features, mask)


@dataclass(frozen=True, eq=False)
class LineDistribution:
    """Probabilities over columns; exactly zero on already-sampled columns."""

    probs: np.ndarray
    mask: CartesianMask

    def sample(self, rng: np.random.Generator) -> int:
        return int(rng.choice(self.mask.cols, p=self.probs))

    def argmax(self) -> int:
        # np.argmax returns the first maximum, which is the lowest index.
        return int(np.argmax(self.probs))


@dataclass(eq=False)
class AcquisitionState:
    """Observable episode state at one step: data, features, and predictions."""

    undersampled: UndersampledKSpace
    t: int
    features: np.ndarray
    y_d: Prediction | None
    y_s: Prediction | None
    initial_lines: int

    def __post_init__(self):
        expected = self.initial_lines + self.t
        if self.undersampled.mask.line_count != expected:
            raise ValueError(
                f"mask has {self.undersampled.mask.line_count} lines, expected {expected}"
            )


@dataclass(eq=False)
class TraceStep:
    """Everything recorded about one acquisition step."""

    t: int
    line: int
    observed: np.ndarray
    candidates: tuple
    candidate_rewards: tuple
    probs: np.ndarray
    reward: StepReward | None
    y_d: Prediction | None
    y_s: Prediction | None


@dataclass(eq=False)
class EpisodeTrace:
    """Initial snapshot plus one entry per acquired line."""

    subject_index: int | None
    initial_mask: CartesianMask
    y_d0: Prediction | None
    y_s0: Prediction | None
    steps: list = field(default_factory=list)

    def chosen_lines(self) -> list[int]:
        return [s.line for s in self.steps]

    def final_predictions(self) -> tuple[Prediction | None, Prediction | None]:
        if not self.steps:
            return self.y_d0, self.y_s0
        return self.steps[-1].y_d, self.steps[-1].y_s

    def diagnosis(self) -> tuple[int, int | None]:
        """Disease argmax, then severity argmax only for a positive disease call."""
        y_d, y_s = self.final_predictions()
        d = int(np.argmax(y_d.probs))
        return d, (int(np.argmax(y_s.probs)) if d == 1 else None)


@dataclass
class PolicyConfig:
    """Hyperparameters shared by all trainable policy variants."""

    hidden: int = 64
    q: int = 4
    initial_lines: int = 3
    steps: int = 7
    beta: float = 0.0
    epochs: int = 15
    batch: int = 16
    lr: float = 0.15
    lr_decay: float = 0.1
    pool: int = 2
    seed: int = 1
    variant: str = "weighted"
    gating: str = "truth"
    reward_mode: str = "immediate"
    candidate_mode: str = "topq"
    center_fraction: float = 0.0

    def schedule(self) -> RewardSchedule:
        return RewardSchedule(T=self.steps, beta=self.beta, L=self.initial_lines)


@dataclass(eq=False)
class PolicyBundle:
    """A runnable policy plus everything needed to build its input features."""

    policy: object
    f_d: MlpParams | None
    f_s: MlpParams | None
    initial_lines: int
    budget: int
    pool: int = 2
    input_kind: str = "features"

    def features(self, state: UndersampledKSpace, y_d=None, y_s=None) -> np.ndarray:
        if self.input_kind == "magnitude":
            return extract_input(state, self.pool)
        if y_d is None or y_s is None:
            x = extract_input(state, self.pool)
            y_d = mlp_forward(self.f_d, x)
            y_s = mlp_forward(self.f_s, x)
        return np.concatenate([y_d.hidden, y_s.hidden])


def init_policy(d_in: int, hidden: int, cols: int, seed: int) -> PolicyParams:
    base = init_mlp(d_in, hidden, cols, seed)
    return PolicyParams(base.w1, base.b1, base.w2, base.b2)


def uniform_policy(d_in: int, hidden: int, cols: int) -> PolicyParams:
    """All-zero parameters: equal logits, hence uniform over unsampled lines."""
    return PolicyParams(
        np.zeros((hidden, d_in)), np.zeros(hidden), np.zeros((cols, hidden)), np.zeros(cols)
    )


def policy_forward(params: MlpParams, features, mask: CartesianMask) -> LineDistribution:
    """Masked softmax over the logits of unsampled columns."""
    unsampled = mask.unsampled_indices()
    if unsampled.size == 0:
        raise ValueError("all lines are sampled; no action available")
    features = np.asarray(features, dtype=float)
    hidden = np.tanh(params.w1 @ features + params.b1)
    logits = params.w2 @ hidden + params.b2
    probs = np.zeros(mask.cols)
    z = np.exp(logits[unsampled] - logits[unsampled].max())
    probs[unsampled] = z / z.sum()
    return LineDistribution(probs=probs, mask=mask)


def greedy_topq(dist: LineDistribution, q: int) -> list[int]:
    """The q most probable unsampled lines, best first, ties going to lower indices."""
    unsampled = dist.mask.unsampled_indices()
    if q > unsampled.size:
        raise ValueError(f"q={q} exceeds {unsampled.size} unsampled lines")
    order = sorted(unsampled, key=lambda i: (-dist.probs[i], i))
    return [int(i) for i in order[:q]]


def select_candidates(
    dist: LineDistribution, q: int, mode: str, rng: np.random.Generator
) -> list[int]:
    """Candidate lines per step: greedy top-q (default) or q draws without replacement."""
    if mode == "topq":
        return greedy_topq(dist, q)
    if mode == "sample":
        if q > dist.mask.unsampled_indices().size:
            raise ValueError(f"q={q} exceeds the number of unsampled lines")
        picked = rng.choice(dist.mask.cols, size=q, replace=False, p=dist.probs)
        return [int(c) for c in picked]
    raise ValueError(f"unknown candidate mode {mode!r}")


def _argmax_lowest(dist: LineDistribution) -> int:
    return dist.argmax()


def evaluate_candidates(
    state: AcquisitionState,
    candidates,
    subject,
    f_d: MlpParams,
    f_s: MlpParams,
    sched: RewardSchedule,
    *,
    weights_d=(1.0, 1.0),
    weights_s=(1.0, 1.0),
    pool: int = 2,
    gating: str = "truth",
    kind: str = "combined",
) -> list[StepReward]:
    """Hypothetically acquire each candidate line and score the prediction change.

    Each candidate is evaluated independently against the pre-step predictions;
    the state itself is never mutated. `gating` selects whether the severity
    reward is suppressed by the true disease label or by the current disease
    prediction; `kind` selects the combined schedule or a single objective.
    """
    if kind not in REWARD_KINDS:
        raise ValueError(f"unknown reward kind {kind!r}")
    cand = [int(c) for c in candidates]
    if len(set(cand)) != len(cand):
        raise ValueError("duplicate candidate line")
    for c in cand:
        if state.undersampled.mask.is_selected(c):
            raise ValueError(f"candidate {c} is already sampled")
    predicted_healthy = int(np.argmax(state.y_d.probs)) == 0
    out = []
    for c in cand:
        hypo = add_line(state.undersampled, subject.kspace, c)
        x = extract_input(hypo, pool)
        new_d = mlp_forward(f_d, x)
        new_s = mlp_forward(f_s, x)
        r_d = ce_improvement(state.y_d, new_d, subject.g_d, weights_d)
        if subject.g_s is None:
            r_s = 0.0
        else:
            r_s = ce_improvement(state.y_s, new_s, subject.g_s, weights_s)
            if gating == "prediction" and predicted_healthy:
                r_s = 0.0
        if kind == "combined":
            out.append(combined_step_reward(r_d, r_s, subject.g_d, state.t, sched))
        elif kind == "disease":
            out.append(StepReward(r_d, 0.0, r_d))
        else:
            r_s_eff = 0.0 if subject.g_d == 0 else r_s
            out.append(StepReward(0.0, r_s_eff, r_s_eff))
    return out


def grad_from_candidate_rewards(
    params: MlpParams, features, mask: CartesianMask, candidates, rewards
) -> MlpParams:
    """Gradient contribution of one step of the greedy-parallel estimator.

    Advantages are mean-subtracted candidate rewards (computed so that equal
    rewards yield an exactly zero gradient), scaled by 1 / (q - 1).
    """
    q = len(candidates)
    if q < 2:
        raise ValueError("the mean baseline needs at least 2 candidates")
    r = np.asarray(rewards, dtype=float)
    shifted = r - r[0]
    adv = shifted - shifted.mean()
    dist = policy_forward(params, features, mask)
    dlogits = np.zeros(mask.cols)
    for i, c in enumerate(candidates):
        dlogits[c] += adv[i]
    dlogits -= adv.sum() * dist.probs
    dlogits /= q - 1
    features = np.asarray(features, dtype=float)
    hidden = np.tanh(params.w1 @ features + params.b1)
    return backward_from_dlogits(params, features, hidden, dlogits)


def log_prob_grad(params: MlpParams, features, mask: CartesianMask, line: int) -> MlpParams:
    """Gradient of log pi(line | features) under the masked softmax."""
    dist = policy_forward(params, features, mask)
    if dist.probs[line] == 0.0 and mask.is_selected(line):
        raise ValueError(f"line {line} is outside the distribution support")
    dlogits = -dist.probs.copy()
    dlogits[line] += 1.0
    features = np.asarray(features, dtype=float)
    hidden = np.tanh(params.w1 @ features + params.b1)
    return backward_from_dlogits(params, features, hidden, dlogits)


def reinforce_grad_step(
    params: MlpParams,
    state: AcquisitionState,
    candidate_rewards,
    candidate_indices,
    rng: np.random.Generator,
) -> tuple[MlpParams, int]:
    """One step of the estimator: gradient contribution plus the committed line."""
    q = len(candidate_indices)
    if q < 2:
        raise ValueError("the mean baseline needs at least 2 candidates")
    rewards = [sr.r for sr in candidate_rewards]
    grad = grad_from_candidate_rewards(
        params, state.features, state.undersampled.mask, candidate_indices, rewards
    )
    committed = int(candidate_indices[rng.integers(q)])
    return grad, committed


def _zero_grad(params: MlpParams) -> MlpParams:
    return MlpParams(
        np.zeros_like(params.w1),
        np.zeros_like(params.b1),
        np.zeros_like(params.w2),
        np.zeros_like(params.b2),
    )


def _accumulate(total: MlpParams, grad: MlpParams, scale: float = 1.0) -> None:
    total.w1 += scale * grad.w1
    total.b1 += scale * grad.b1
    total.w2 += scale * grad.w2
    total.b2 += scale * grad.b2


def run_training_episode(
    subject,
    params: MlpParams,
    f_d: MlpParams,
    f_s: MlpParams,
    sched: RewardSchedule,
    q: int,
    rng: np.random.Generator,
    *,
    weights_d=(1.0, 1.0),
    weights_s=(1.0, 1.0),
    pool: int = 2,
    gating: str = "truth",
    reward_mode: str = "immediate",
    reward_kind: str = "combined",
    candidate_mode: str = "topq",
    center_fraction: float = 0.0,
    subject_index: int | None = None,
) -> tuple[EpisodeTrace, MlpParams]:
    """Run one training episode and return its trace plus the summed policy gradient.

    With reward_mode "to_go" each candidate reward is augmented by the realized
    return of the committed suffix before the baseline is subtracted; since the
    suffix is shared by all candidates of a step, the advantages (and hence the
    gradient) match the immediate mode.
    """
    if reward_mode not in ("immediate", "to_go"):
        raise ValueError(f"unknown reward mode {reward_mode!r}")
    rows, cols = subject.kspace.shape
    if sched.L + sched.T > cols:
        raise ValueError("budget exceeds the number of columns")
    mask = init_random_mask(cols, sched.L, center_fraction, rng)
    initial_lines = mask.line_count
    current = apply_mask(subject.kspace, mask)
    x = extract_input(current, pool)
    y_d = mlp_forward(f_d, x)
    y_s = mlp_forward(f_s, x)
    trace = EpisodeTrace(
        subject_index=subject_index, initial_mask=mask, y_d0=y_d, y_s0=y_s
    )
    pending = []  # (features, mask, candidates, combined rewards) per step
    for t in range(sched.T):
        features = np.concatenate([y_d.hidden, y_s.hidden])
        state = AcquisitionState(current, t, features, y_d, y_s, initial_lines)
        dist = policy_forward(params, features, current.mask)
        candidates = select_candidates(dist, q, candidate_mode, rng)
        step_rewards = evaluate_candidates(
            state,
            candidates,
            subject,
            f_d,
            f_s,
            sched,
            weights_d=weights_d,
            weights_s=weights_s,
            pool=pool,
            gating=gating,
            kind=reward_kind,
        )
        committed_slot = int(rng.integers(q))
        line = candidates[committed_slot]
        current = add_line(current, subject.kspace, line)
        x = extract_input(current, pool)
        y_d = mlp_forward(f_d, x)
        y_s = mlp_forward(f_s, x)
        trace.steps.append(
            TraceStep(
                t=t,
                line=line,
                observed=subject.kspace[:, line].copy(),
                candidates=tuple(candidates),
                candidate_rewards=tuple(step_rewards),
                probs=dist.probs.copy(),
                reward=step_rewards[committed_slot],
                y_d=y_d,
                y_s=y_s,
            )
        )
        pending.append((features, state.undersampled.mask, candidates, [sr.r for sr in step_rewards]))

    grad_total = _zero_grad(params)
    committed_returns = [step.reward.r for step in trace.steps]
    for t, (features, step_mask, candidates, rewards) in enumerate(pending):
        if reward_mode == "to_go":
            future = float(np.sum(committed_returns[t + 1 :]))
            rewards = [r + future for r in rewards]
        _accumulate(
            grad_total, grad_from_candidate_rewards(params, features, step_mask, candidates, rewards)
        )
    return trace, grad_total


def run_inference_episode(
    subject,
    bundle: PolicyBundle,
    *,
    mode: str = "sample",
    stop: float | None = None,
    rng: np.random.Generator | None = None,
    mask_seed=None,
    subject_index: int | None = None,
) -> EpisodeTrace:
    """Acquire one line per step until the budget is spent or confidence suffices.

    With a stop threshold, the episode ends as soon as the disease confidence
    reaches it and, if the disease call is positive, the severity confidence
    does too; the initial predictions already count.
    """
    if mode not in ("sample", "argmax"):
        raise ValueError(f"unknown inference mode {mode!r}")
    rows, cols = subject.kspace.shape
    if rng is None:
        rng = np.random.default_rng(0)
    mask = init_random_mask(cols, bundle.initial_lines, 0.0, mask_seed if mask_seed is not None else rng)
    current = apply_mask(subject.kspace, mask)

    def predict(state):
        if bundle.f_d is None:
            return None, None
        x = extract_input(state, bundle.pool)
        return mlp_forward(bundle.f_d, x), mlp_forward(bundle.f_s, x)

    def confident(y_d, y_s):
        if stop is None:
            return False
        if float(y_d.probs.max()) < stop:
            return False
        if int(np.argmax(y_d.probs)) == 1 and float(y_s.probs.max()) < stop:
            return False
        return True

    y_d, y_s = predict(current)
    trace = EpisodeTrace(subject_index=subject_index, initial_mask=mask, y_d0=y_d, y_s0=y_s)
    if stop is not None and bundle.f_d is None:
        raise ValueError("a stop threshold needs classifiers in the bundle")
    if confident(y_d, y_s):
        return trace
    for t in range(bundle.budget):
        features = bundle.features(current, y_d, y_s)
        dist = _distribution(bundle.policy, features, current.mask)
        line = dist.sample(rng) if mode == "sample" else _argmax_lowest(dist)
        current = add_line(current, subject.kspace, line)
        y_d, y_s = predict(current)
        trace.steps.append(
            TraceStep(
                t=t,
                line=line,
                observed=subject.kspace[:, line].copy(),
                candidates=(),
                candidate_rewards=(),
                probs=dist.probs.copy(),
                reward=None,
                y_d=y_d,
                y_s=y_s,
            )
        )
        if confident(y_d, y_s):
            break
    return trace


def _distribution(policy, features, mask: CartesianMask) -> LineDistribution:
    dist = getattr(policy, "distribution", None)
    if dist is not None:
        return dist(features, mask)
    return policy_forward(policy, features, mask)


def episode_rng(seed: int, subject_index: int) -> np.random.Generator:
    """Per-episode stream derived from (seed, subject index)."""
    return np.random.default_rng(np.random.SeedSequence([seed, _STREAM_EPISODE, subject_index]))


def validation_rng(seed: int, subject_index: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([seed, _STREAM_VAL, subject_index]))


def _validation_metric(policy, f_d, f_s, val_subjects, cfg: PolicyConfig, variant: str) -> float:
    """Sequential balanced accuracy at full budget (task-specific for single-task variants)."""
    bundle = PolicyBundle(
        policy=policy,
        f_d=f_d,
        f_s=f_s,
        initial_lines=cfg.initial_lines,
        budget=cfg.steps,
        pool=cfg.pool,
        input_kind="magnitude" if variant == "recon" else "features",
    )
    if variant == "recon":
        scores = []
        for idx, subject in enumerate(val_subjects):
            trace = run_inference_episode(
                subject, bundle, mode="sample", rng=validation_rng(cfg.seed, idx), subject_index=idx
            )
            state = apply_mask(subject.kspace, _final_mask(trace))
            scores.append(ssim(zero_fill_magnitude(state), np.abs(subject.image)))
        return float(np.mean(scores))

    records = []
    for idx, subject in enumerate(val_subjects):
        trace = run_inference_episode(
            subject, bundle, mode="sample", rng=validation_rng(cfg.seed, idx), subject_index=idx
        )
        y_d, y_s = trace.final_predictions()
        records.append(
            EvalRecord(idx, subject.g_d, subject.g_s, [y_d.probs], [y_s.probs], [])
        )
    if variant == "disease":
        return balanced_accuracy(
            [r.g_d for r in records], [int(np.argmax(r.probs_d[0])) for r in records]
        )
    if variant == "severity":
        diseased = [r for r in records if r.g_d == 1]
        return balanced_accuracy(
            [r.g_s for r in diseased], [int(np.argmax(r.probs_s[0])) for r in diseased]
        )
    return sequential_accuracy(records)


def _final_mask(trace: EpisodeTrace) -> CartesianMask:
    sel = trace.initial_mask.selected.copy()
    for line in trace.chosen_lines():
        sel[line] = 1
    return CartesianMask(trace.initial_mask.cols, sel)


def _decayed_lr(cfg: PolicyConfig, epoch: int) -> float:
    boundary = (2 * cfg.epochs) // 3
    return cfg.lr * (cfg.lr_decay if cfg.epochs > 1 and epoch >= boundary else 1.0)


def train_policy(
    train_subjects,
    val_subjects,
    f_d: MlpParams | None,
    f_s: MlpParams | None,
    variant: str,
    cfg: PolicyConfig,
) -> TrainResult:
    """Train a sampling policy with the requested reward structure.

    Variants: "weighted" (two objectives on the cosine schedule), "disease" and
    "severity" (single objective), "simulated" (batch three-class F1 reward),
    "recon" (structural-similarity reward on the zero-filled reconstruction,
    classifier-free), "varying" (averaged dual policy, see the variants
    module), and "random" (untrained uniform sentinel).
    """
    if variant not in VARIANTS:
        raise ValueError(f"unknown variant {variant!r}; expected one of {', '.join(VARIANTS)}")
    if variant == "varying":
        from .variants import train_varying_parameter

        return train_varying_parameter(train_subjects, val_subjects, f_d, f_s, cfg)

    rows, cols = train_subjects[0].kspace.shape
    if variant == "recon":
        d_in = (rows // cfg.pool) * (cols // cfg.pool)
    else:
        if f_d is None or f_s is None:
            raise ValueError(f"variant {variant!r} needs both classifiers")
        d_in = 2 * f_d.hidden
    if variant == "random":
        return TrainResult(params=uniform_policy(d_in, cfg.hidden, cols))

    params = init_policy(d_in, cfg.hidden, cols, cfg.seed)
    if variant == "severity":
        epi_subjects = [(i, s) for i, s in enumerate(train_subjects) if s.g_d == 1]
        val_subjects = [s for s in val_subjects if s.g_d == 1]
        if not epi_subjects:
            raise ValueError("severity variant needs diseased training subjects")
    else:
        epi_subjects = list(enumerate(train_subjects))

    weights_d, weights_s = _reward_weights(train_subjects)
    sched = cfg.schedule()
    rng = np.random.default_rng(np.random.SeedSequence([cfg.seed, _STREAM_EPISODE]))
    result = TrainResult(params=params.copy())
    n = len(epi_subjects)
    for epoch in range(cfg.epochs):
        lr = _decayed_lr(cfg, epoch)
        order = rng.permutation(n)
        for start in range(0, n, cfg.batch):
            batch = np.sort(order[start : start + cfg.batch])
            if variant == "simulated":
                grad = _simulated_batch_grad(
                    [epi_subjects[i] for i in batch], params, f_d, f_s, cfg, rng
                )
            else:
                grad = _zero_grad(params)
                for i in batch:
                    idx, subject = epi_subjects[i]
                    if variant == "recon":
                        _, g = run_training_episode_recon(
                            subject, params, sched, cfg.q, rng, pool=cfg.pool, subject_index=idx
                        )
                    else:
                        _, g = run_training_episode(
                            subject,
                            params,
                            f_d,
                            f_s,
                            sched,
                            cfg.q,
                            rng,
                            weights_d=weights_d,
                            weights_s=weights_s,
                            pool=cfg.pool,
                            gating=cfg.gating,
                            reward_mode=cfg.reward_mode,
                            reward_kind=_reward_kind(variant),
                            candidate_mode=cfg.candidate_mode,
                            center_fraction=cfg.center_fraction,
                            subject_index=idx,
                        )
                    _accumulate(grad, g)
            scale = lr / batch.size
            params.w1 += scale * grad.w1
            params.b1 += scale * grad.b1
            params.w2 += scale * grad.w2
            params.b2 += scale * grad.b2
        metric = _validation_metric(params, f_d, f_s, val_subjects, cfg, variant)
        result.history.append({"epoch": epoch, "val_metric": metric})
        if result.best_epoch < 0 or metric > result.best_metric:
            result.best_epoch = epoch
            result.best_metric = metric
            result.params = params.copy()
    return result


def _reward_kind(variant: str) -> str:
    return {"weighted": "combined", "disease": "disease", "severity": "severity"}[variant]


def _reward_weights(subjects) -> tuple[np.ndarray, np.ndarray]:
    """Inverse-frequency weights matching the classifiers' training loss."""
    d_labels = [s.g_d for s in subjects]
    s_labels = [s.g_s for s in subjects if s.g_d == 1]
    weights_d = class_weights_from_labels(d_labels) if len(set(d_labels)) == 2 else np.ones(2)
    weights_s = class_weights_from_labels(s_labels) if len(set(s_labels)) == 2 else np.ones(2)
    return weights_d, weights_s


def run_training_episode_recon(
    subject,
    params: MlpParams,
    sched: RewardSchedule,
    q: int,
    rng: np.random.Generator,
    *,
    pool: int = 2,
    subject_index: int | None = None,
) -> tuple[EpisodeTrace, MlpParams]:
    """Training episode rewarded by the structural-similarity gain of each line.

    The policy input is the pooled zero-filled magnitude itself, so this
    variant needs no classifiers; the reference image is the ground truth
    magnitude. Rewards are carried in the trace's disease slot.
    """
    rows, cols = subject.kspace.shape
    if sched.L + sched.T > cols:
        raise ValueError("budget exceeds the number of columns")
    reference = np.abs(subject.image)
    mask = init_random_mask(cols, sched.L, 0.0, rng)
    current = apply_mask(subject.kspace, mask)
    score = ssim(zero_fill_magnitude(current), reference)
    trace = EpisodeTrace(subject_index=subject_index, initial_mask=mask, y_d0=None, y_s0=None)
    grad_total = _zero_grad(params)
    for t in range(sched.T):
        features = extract_input(current, pool)
        dist = policy_forward(params, features, current.mask)
        candidates = greedy_topq(dist, q)
        rewards = []
        hypo_scores = []
        for c in candidates:
            hypo = add_line(current, subject.kspace, c)
            s = ssim(zero_fill_magnitude(hypo), reference)
            hypo_scores.append(s)
            rewards.append(s - score)
        _accumulate(
            grad_total,
            grad_from_candidate_rewards(params, features, current.mask, candidates, rewards),
        )
        slot = int(rng.integers(q))
        line = candidates[slot]
        current = add_line(current, subject.kspace, line)
        score = hypo_scores[slot]
        trace.steps.append(
            TraceStep(
                t=t,
                line=line,
                observed=subject.kspace[:, line].copy(),
                candidates=tuple(candidates),
                candidate_rewards=tuple(StepReward(r, 0.0, r) for r in rewards),
                probs=dist.probs.copy(),
                reward=StepReward(rewards[slot], 0.0, rewards[slot]),
                y_d=None,
                y_s=None,
            )
        )
    return trace, grad_total


def _simulated_batch_grad(
    indexed_subjects, params: MlpParams, f_d: MlpParams, f_s: MlpParams, cfg: PolicyConfig, rng
) -> MlpParams:
    """Lockstep episodes over a batch rewarded by the batch macro-F1 improvement.

    For candidate slot i, every subject hypothetically acquires its own i-th
    candidate; the batch-level F1 gain of that joint move is broadcast to each
    subject as its reward r_{i,t}.
    """
    subjects = [s for _, s in indexed_subjects]
    labels = [s.outcome for s in subjects]
    cols = subjects[0].kspace.shape[1]
    sched = cfg.schedule()
    states = []
    for _, subject in indexed_subjects:
        mask = init_random_mask(cols, sched.L, cfg.center_fraction, rng)
        current = apply_mask(subject.kspace, mask)
        x = extract_input(current, cfg.pool)
        states.append([current, mlp_forward(f_d, x), mlp_forward(f_s, x)])
    grad_total = _zero_grad(params)
    for t in range(sched.T):
        prev_preds = [(y_d.probs, y_s.probs) for _, y_d, y_s in states]
        all_features = []
        all_candidates = []
        hypo_cache = []  # per subject, per slot: (probs_d, probs_s, y_d, y_s)
        for (current, y_d, y_s), subject in zip(states, subjects):
            features = np.concatenate([y_d.hidden, y_s.hidden])
            dist = policy_forward(params, features, current.mask)
            candidates = greedy_topq(dist, cfg.q)
            per_slot = []
            for c in candidates:
                hypo = add_line(current, subject.kspace, c)
                x = extract_input(hypo, cfg.pool)
                nd = mlp_forward(f_d, x)
                ns = mlp_forward(f_s, x)
                per_slot.append((nd, ns))
            all_features.append(features)
            all_candidates.append(candidates)
            hypo_cache.append(per_slot)
        slot_rewards = []
        for slot in range(cfg.q):
            next_preds = [
                (cache[slot][0].probs, cache[slot][1].probs) for cache in hypo_cache
            ]
            slot_rewards.append(three_class_f1_reward(prev_preds, next_preds, labels))
        for s_idx, (current, y_d, y_s) in enumerate(states):
            _accumulate(
                grad_total,
                grad_from_candidate_rewards(
                    params, all_features[s_idx], current.mask, all_candidates[s_idx], slot_rewards
                ),
            )
        for s_idx, subject in enumerate(subjects):
            slot = int(rng.integers(cfg.q))
            line = all_candidates[s_idx][slot]
            current = add_line(states[s_idx][0], subject.kspace, line)
            nd, ns = hypo_cache[s_idx][slot]
            states[s_idx] = [current, nd, ns]
    return grad_total
