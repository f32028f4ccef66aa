"""Feedforward classifiers operating on undersampled k-space.

A single-hidden-layer tanh MLP predicts disease presence (or severity) from a
pooled, standardized zero-filled reconstruction. The hidden activations double
as the feature representation handed to the sampling policy, and the analytic
backward pass is exact so it can be checked against finite differences.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .kspace import CartesianMask, UndersampledKSpace, apply_mask, init_random_mask, zero_fill_magnitude
from .metrics import balanced_accuracy

PROB_FLOOR = 1e-12
VARIANCE_FLOOR = 1e-8

# Stream tags keeping the independent RNG consumers of one seed apart.
_STREAM_TRAIN = 11
_STREAM_VAL_MASK = 13
_STREAM_INIT = 17


@dataclass(eq=False)
class MlpParams:
    """Weights of one tanh hidden layer followed by a softmax readout.

    Canonical flat order is w1 row-major, b1, w2 row-major, b2; this order is
    shared by checkpoints and gradient containers.
    """

    w1: np.ndarray
    b1: np.ndarray
    w2: np.ndarray
    b2: np.ndarray
    activation: str = "tanh"

    def __post_init__(self):
        self.w1 = np.asarray(self.w1, dtype=float)
        self.b1 = np.asarray(self.b1, dtype=float)
        self.w2 = np.asarray(self.w2, dtype=float)
        self.b2 = np.asarray(self.b2, dtype=float)
        h, d_in = self.w1.shape
        k = self.w2.shape[0]
        if self.b1.shape != (h,) or self.w2.shape != (k, h) or self.b2.shape != (k,):
            raise ValueError("inconsistent layer dimensions")
        if self.activation != "tanh":
            raise ValueError(f"unsupported activation {self.activation!r}")
        for block in (self.w1, self.b1, self.w2, self.b2):
            if not np.isfinite(block).all():
                raise ValueError("non-finite parameter detected")

    @property
    def d_in(self) -> int:
        return self.w1.shape[1]

    @property
    def hidden(self) -> int:
        return self.w1.shape[0]

    @property
    def n_out(self) -> int:
        return self.w2.shape[0]

    @property
    def n_params(self) -> int:
        return self.w1.size + self.b1.size + self.w2.size + self.b2.size

    def to_flat(self) -> np.ndarray:
        return np.concatenate(
            [self.w1.ravel(), self.b1, self.w2.ravel(), self.b2]
        )

    def with_flat(self, flat: np.ndarray) -> "MlpParams":
        flat = np.asarray(flat, dtype=float)
        if flat.shape != (self.n_params,):
            raise ValueError("flat vector length mismatch")
        h, d_in = self.w1.shape
        k = self.w2.shape[0]
        parts = np.split(flat, np.cumsum([h * d_in, h, k * h])[:3])
        return replace(
            self,
            w1=parts[0].reshape(h, d_in),
            b1=parts[1].copy(),
            w2=parts[2].reshape(k, h),
            b2=parts[3].copy(),
        )

    def copy(self) -> "MlpParams":
        return replace(
            self, w1=self.w1.copy(), b1=self.b1.copy(), w2=self.w2.copy(), b2=self.b2.copy()
        )


@dataclass(frozen=True, eq=False)
class Prediction:
    """Class probabilities plus the penultimate activations that produced them."""

    probs: np.ndarray
    hidden: np.ndarray


@dataclass
class ClassifierConfig:
    """Hyperparameters for classifier training on randomly undersampled inputs."""

    hidden: int = 32
    pool: int = 2
    epochs: int = 40
    batch: int = 16
    lr: float = 0.05
    seed: int = 1
    rate_min: float = 0.05
    rate_max: float = 0.30
    cf_min: float = 0.0
    cf_max: float = 0.05
    val_rate: float = 0.30
    val_cf: float = 0.05


@dataclass
class TrainResult:
    """Best-epoch parameters plus the per-epoch history rows."""

    params: object
    history: list = field(default_factory=list)
    best_epoch: int = -1
    best_metric: float = float("nan")


def init_mlp(d_in: int, hidden: int, n_out: int, seed: int) -> MlpParams:
    """Deterministic scaled-uniform initialization."""
    rng = np.random.default_rng(np.random.SeedSequence([seed, _STREAM_INIT]))
    lim1 = np.sqrt(6.0 / (d_in + hidden))
    lim2 = np.sqrt(6.0 / (hidden + n_out))
    return MlpParams(
        w1=rng.uniform(-lim1, lim1, size=(hidden, d_in)),
        b1=np.zeros(hidden),
        w2=rng.uniform(-lim2, lim2, size=(n_out, hidden)),
        b2=np.zeros(n_out),
    )


def extract_input(state: UndersampledKSpace, pool: int) -> np.ndarray:
    """Pooled, standardized zero-filled magnitude as a flat feature vector.

    Block-averages the magnitude image over pool x pool tiles, flattens
    row-major, and standardizes the vector to zero mean and unit variance with
    a variance floor (a constant image maps to the zero vector).
    """
    mag = zero_fill_magnitude(state)
    rows, cols = mag.shape
    if pool < 1 or rows % pool or cols % pool:
        raise ValueError(f"pool {pool} must divide image shape {mag.shape}")
    pooled = mag.reshape(rows // pool, pool, cols // pool, pool).mean(axis=(1, 3))
    v = pooled.reshape(-1)
    std = np.sqrt(max(float(v.var()), VARIANCE_FLOOR))
    return (v - v.mean()) / std


def mlp_forward(params: MlpParams, x) -> Prediction:
    """Hidden activations and softmax probabilities for one input vector."""
    x = np.asarray(x, dtype=float)
    if x.shape != (params.d_in,):
        raise ValueError(f"input length {x.shape} does not match d_in {params.d_in}")
    hidden = np.tanh(params.w1 @ x + params.b1)
    logits = params.w2 @ hidden + params.b2
    shifted = np.exp(logits - logits.max())
    return Prediction(probs=shifted / shifted.sum(), hidden=hidden)


def weighted_ce(probs, label: int, class_weights) -> float:
    """Class-weighted negative log likelihood with the probability floored at 1e-12."""
    probs = np.asarray(probs, dtype=float)
    class_weights = np.asarray(class_weights, dtype=float)
    if not 0 <= label < probs.size:
        raise ValueError(f"label {label} out of range for {probs.size} classes")
    return float(class_weights[label] * -np.log(max(float(probs[label]), PROB_FLOOR)))


def backward_from_dlogits(params: MlpParams, x, hidden, dlogits) -> MlpParams:
    """Backpropagate an arbitrary logit-space gradient; returns a params-shaped gradient."""
    x = np.asarray(x, dtype=float)
    gw2 = np.outer(dlogits, hidden)
    gb2 = np.asarray(dlogits, dtype=float).copy()
    dhidden = params.w2.T @ dlogits
    dpre = dhidden * (1.0 - hidden * hidden)
    gw1 = np.outer(dpre, x)
    return MlpParams(gw1, dpre, gw2, gb2, activation=params.activation)


def mlp_backward(params: MlpParams, x, label: int, class_weights) -> MlpParams:
    """Exact gradient of weighted_ce(mlp_forward(x), label) in every parameter."""
    pred = mlp_forward(params, x)
    class_weights = np.asarray(class_weights, dtype=float)
    if not 0 <= label < params.n_out:
        raise ValueError(f"label {label} out of range for {params.n_out} classes")
    dlogits = pred.probs.copy()
    dlogits[label] -= 1.0
    dlogits *= class_weights[label]
    return backward_from_dlogits(params, x, pred.hidden, dlogits)


def class_weights_from_labels(labels, n_classes: int = 2) -> np.ndarray:
    """Inverse-frequency weights N / (K * N_k) from the training label counts."""
    labels = np.asarray(labels, dtype=int)
    counts = np.bincount(labels, minlength=n_classes)
    if np.any(counts == 0):
        raise ValueError("every class must appear in the training labels")
    return labels.size / (n_classes * counts.astype(float))


def feature_map(f_d: MlpParams, f_s: MlpParams, state: UndersampledKSpace, pool: int = 2) -> np.ndarray:
    """Concatenated hidden activations of both classifiers on the shared input."""
    if f_d.d_in != f_s.d_in or f_d.hidden != f_s.hidden:
        raise ValueError("classifiers must share input and hidden dimensions")
    x = extract_input(state, pool)
    return np.concatenate([mlp_forward(f_d, x).hidden, mlp_forward(f_s, x).hidden])


def _training_mask(cols: int, rng: np.random.Generator, cfg: ClassifierConfig) -> CartesianMask:
    rate = rng.uniform(cfg.rate_min, cfg.rate_max)
    cf = rng.uniform(cfg.cf_min, cfg.cf_max)
    n_center = int(cf * cols)
    n_random = max(int(round(rate * cols)) - n_center, 0)
    return init_random_mask(cols, n_random, cf, rng)


def validation_mask(cols: int, seed: int, subject_index: int, rate: float, cf: float) -> CartesianMask:
    """Fixed per-subject mask so the validation metric is comparable across epochs."""
    n_center = int(cf * cols)
    n_random = max(int(round(rate * cols)) - n_center, 0)
    rng = np.random.default_rng(np.random.SeedSequence([seed, _STREAM_VAL_MASK, subject_index]))
    return init_random_mask(cols, n_random, cf, rng)


def _classify(params: MlpParams, subject, mask: CartesianMask, pool: int) -> int:
    state = apply_mask(subject.kspace, mask)
    return int(np.argmax(mlp_forward(params, extract_input(state, pool)).probs))


def _validation_bacc(params, subjects, labels, cfg: ClassifierConfig) -> float:
    preds = []
    for idx, subject in enumerate(subjects):
        mask = validation_mask(subject.kspace.shape[1], cfg.seed, idx, cfg.val_rate, cfg.val_cf)
        preds.append(_classify(params, subject, mask, cfg.pool))
    return balanced_accuracy(labels, preds)


def _train_mlp(train_subjects, train_labels, val_subjects, val_labels, cfg, init) -> TrainResult:
    """Mini-batch gradient descent with per-epoch mask re-randomization.

    Keeps the parameters of the epoch with the best validation balanced
    accuracy. Gradients within a batch are summed in subject-index order for
    determinism.
    """
    if len(train_subjects) == 0:
        raise ValueError("empty training set")
    train_labels = np.asarray(train_labels, dtype=int)
    weights = class_weights_from_labels(train_labels)
    params = init.copy()
    best = params.copy()
    result = TrainResult(params=best)
    rng = np.random.default_rng(np.random.SeedSequence([cfg.seed, _STREAM_TRAIN]))
    n = len(train_subjects)
    for epoch in range(cfg.epochs):
        order = rng.permutation(n)
        losses = []
        for start in range(0, n, cfg.batch):
            batch = np.sort(order[start : start + cfg.batch])
            grad_flat = np.zeros(params.n_params)
            for idx in batch:
                subject = train_subjects[idx]
                mask = _training_mask(subject.kspace.shape[1], rng, cfg)
                x = extract_input(apply_mask(subject.kspace, mask), cfg.pool)
                label = int(train_labels[idx])
                losses.append(weighted_ce(mlp_forward(params, x).probs, label, weights))
                grad_flat += mlp_backward(params, x, label, weights).to_flat()
            step = params.to_flat() - cfg.lr * grad_flat / batch.size
            params = params.with_flat(step)
        val_bacc = _validation_bacc(params, val_subjects, val_labels, cfg)
        result.history.append(
            {"epoch": epoch, "train_loss": float(np.mean(losses)), "val_bacc": val_bacc}
        )
        if result.best_epoch < 0 or val_bacc > result.best_metric:
            result.best_epoch = epoch
            result.best_metric = val_bacc
            result.params = params.copy()
    return result


def train_disease(train_subjects, val_subjects, cfg: ClassifierConfig) -> TrainResult:
    """Train the disease classifier from scratch on randomly undersampled inputs."""
    labels = [s.g_d for s in train_subjects]
    if len(set(labels)) < 2:
        raise ValueError("training set must contain both disease classes")
    rows, cols = train_subjects[0].kspace.shape
    d_in = (rows // cfg.pool) * (cols // cfg.pool)
    init = init_mlp(d_in, cfg.hidden, 2, cfg.seed)
    if cfg.epochs == 0:
        return TrainResult(params=init)
    return _train_mlp(
        train_subjects, labels, val_subjects, [s.g_d for s in val_subjects], cfg, init
    )


def finetune_severity(
    disease_params: MlpParams, train_subjects, val_subjects, cfg: ClassifierConfig
) -> TrainResult:
    """Fine-tune from the disease classifier against severity labels.

    Every supplied subject must be diseased; a healthy subject is a hard error
    because it carries no severity label.
    """
    for subject in list(train_subjects) + list(val_subjects):
        if subject.g_d != 1:
            raise ValueError("finetune_severity accepts diseased subjects only")
    if cfg.epochs == 0:
        return TrainResult(params=disease_params.copy())
    labels = [s.g_s for s in train_subjects]
    if len(set(labels)) < 2:
        raise ValueError("training set must contain both severity classes")
    return _train_mlp(
        train_subjects, labels, val_subjects, [s.g_s for s in val_subjects], cfg, disease_params
    )
