"""
Linear softmax classifier trained on fixed patch features.

It plays the role of the CNN classification head at desk scale: the
selection metric acts on features, so a multinomial logistic regression
isolates the effect of which WSI gets annotated.

Weights are a C×(D+1) matrix whose last column is the bias.
"""

from dataclasses import dataclass, field
from typing import Callable, Optional, Tuple

import numpy as np
from scipy.special import log_softmax, softmax

from dataset import FeatureTable, UNLABELED, class_histogram
from errors import DimensionError, LabelingError, TrainingError
from services.logger import logger
from services.seeding import derive_seed

ADAM_BETAS = (0.9, 0.999)
ADAM_EPS = 1e-8

# Stream keys for derive_seed.
_SOURCE_STREAM = 0
_TARGET_STREAM = 1
_ORDER_STREAM = 2


@dataclass(frozen=True)
class TrainConfig:
    """
    Training knobs.

    batch_size is per domain: with an extra target table every batch pairs
    its source patches (batch_size, fewer in the last batch) with as many
    target patches.
    """
    epochs: int = 30
    lr: float = 0.01
    batch_size: int = 32
    optimizer: str = "adam"
    weight_decay: float = 0.0
    early_stop: bool = False
    patience: int = 10


@dataclass(frozen=True, eq=False)
class Classifier:
    weights: np.ndarray
    config: TrainConfig = field(default_factory=TrainConfig)
    seed: int = 0
    epochs_run: int = 0

    @property
    def num_classes(self) -> int:
        return int(self.weights.shape[0])

    @property
    def dim(self) -> int:
        return int(self.weights.shape[1] - 1)

    def scores(self, features: np.ndarray) -> np.ndarray:
        features = np.asarray(features, dtype=np.float64)
        if features.ndim != 2 or features.shape[1] != self.dim:
            raise DimensionError(f"classifier expects {self.dim} features, got shape {features.shape}")
        return features @ self.weights[:, :-1].T + self.weights[:, -1]

    def predict_proba(self, features: np.ndarray) -> np.ndarray:
        return softmax(self.scores(features), axis=1)

    def predict(self, features: np.ndarray) -> np.ndarray:
        return np.argmax(self.scores(features), axis=1)


def loss_and_grad(
    weights: np.ndarray,
    features: np.ndarray,
    labels: np.ndarray,
    weight_decay: float = 0.0,
) -> Tuple[float, np.ndarray]:
    """
    Mean cross-entropy of a batch and its gradient with respect to `weights`.

    An L2 penalty 0.5·weight_decay·‖W‖² applies to the non-bias columns.
    """
    n = features.shape[0]
    augmented = np.hstack([features, np.ones((n, 1))])
    logits = augmented @ weights.T
    log_probs = log_softmax(logits, axis=1)
    rows = np.arange(n)
    loss = -float(log_probs[rows, labels].mean())

    residual = np.exp(log_probs)
    residual[rows, labels] -= 1.0
    grad = residual.T @ augmented / n

    if weight_decay:
        penalized = weights[:, :-1]
        loss += 0.5 * weight_decay * float(np.sum(penalized**2))
        grad[:, :-1] += weight_decay * penalized
    return loss, grad


# ---------------- REBALANCING ----------------


def rebalance(table: FeatureTable, seed: int) -> FeatureTable:
    """
    Resample every present class to the geometric mean of the class counts.

    Majority classes are under-sampled without replacement; minority classes
    keep all their records and add copies drawn with replacement. Copies get
    the patch id suffix `~k` so ids stay unique.

    Raises:
        LabelingError: the table has unlabeled records.
    """
    if not table.is_fully_labeled:
        raise LabelingError("rebalance needs a fully labeled table")
    counts = class_histogram(table).counts
    present = np.flatnonzero(counts)
    target = max(int(round(float(np.exp(np.log(counts[present]).mean())))), 1)

    rng = np.random.default_rng(seed)
    picks = []
    for c in present:
        rows = np.flatnonzero(table.labels == c)
        if rows.size >= target:
            picks.append(np.sort(rng.choice(rows, size=target, replace=False)))
        else:
            extra = rng.choice(rows, size=target - rows.size, replace=True)
            picks.append(np.concatenate([rows, extra]))
    positions = np.concatenate(picks)

    copies: dict = {}
    patch_ids = []
    for i in positions:
        k = copies.get(i, 0)
        copies[i] = k + 1
        patch_id = table.patch_ids[i]
        patch_ids.append(patch_id if k == 0 else f"{patch_id}~{k}")

    return FeatureTable(
        patch_ids=tuple(patch_ids),
        group_ids=tuple(table.group_ids[i] for i in positions),
        labels=table.labels[positions],
        features=table.features[positions],
        num_classes=table.num_classes,
        domain=table.domain,
    )


# ---------------- TRAINING ----------------


class _Adam:
    def __init__(self, shape: Tuple[int, ...], lr: float):
        self.lr = lr
        self.m = np.zeros(shape)
        self.v = np.zeros(shape)
        self.t = 0

    def step(self, weights: np.ndarray, grad: np.ndarray) -> np.ndarray:
        beta1, beta2 = ADAM_BETAS
        self.t += 1
        self.m = beta1 * self.m + (1 - beta1) * grad
        self.v = beta2 * self.v + (1 - beta2) * grad**2
        m_hat = self.m / (1 - beta1**self.t)
        v_hat = self.v / (1 - beta2**self.t)
        return weights - self.lr * m_hat / (np.sqrt(v_hat) + ADAM_EPS)


class _Sgd:
    def __init__(self, shape: Tuple[int, ...], lr: float):
        self.lr = lr

    def step(self, weights: np.ndarray, grad: np.ndarray) -> np.ndarray:
        return weights - self.lr * grad


_OPTIMIZERS = {"adam": _Adam, "sgd": _Sgd}


def _check_labeled(table: FeatureTable, name: str) -> None:
    if len(table) == 0:
        raise LabelingError(f"{name} table is empty")
    if (table.labels == UNLABELED).any():
        raise LabelingError(f"{name} table has unlabeled records")


def _epoch_batches(
    source: FeatureTable,
    target: Optional[FeatureTable],
    batch_size: int,
    rng: np.random.Generator,
):
    """Yield (features, labels) batches: each source batch plus as many target rows."""
    source_order = rng.permutation(len(source))
    target_order = rng.permutation(len(target)) if target is not None else None
    cursor = 0
    for start in range(0, len(source), batch_size):
        rows = source_order[start : start + batch_size]
        x, y = source.features[rows], source.labels[rows]
        if target is not None:
            take = []
            while len(take) < len(rows):
                if cursor == len(target_order):
                    target_order = rng.permutation(len(target))
                    cursor = 0
                chunk = target_order[cursor : cursor + len(rows) - len(take)]
                cursor += len(chunk)
                take.extend(chunk.tolist())
            x = np.vstack([x, target.features[take]])
            y = np.concatenate([y, target.labels[take]])
        yield x, y


def train(
    source: FeatureTable,
    extra_target: Optional[FeatureTable] = None,
    config: TrainConfig = TrainConfig(),
    seed: int = 0,
    init: Optional[Classifier] = None,
    validate: Optional[Callable[[Classifier], float]] = None,
) -> Classifier:
    """
    Mini-batch training of the softmax classifier on cross-entropy.

    Both pools are re-balanced at every epoch. With `extra_target` each batch
    is half source, half target.

    Args:
        source: labeled training table.
        extra_target: labeled target WSI(s) added to every batch.
        config: optimizer and schedule.
        seed: makes the run reproducible.
        init: start from these weights instead of zeros.
        validate: score function (higher is better) for early stopping; used
            only when config.early_stop is set.

    Raises:
        LabelingError: a training table has unlabeled records.
        DimensionError: table dimensions disagree with each other or `init`.
        TrainingError: the loss becomes non-finite.
    """
    _check_labeled(source, "source")
    if extra_target is not None:
        _check_labeled(extra_target, "target")
        if extra_target.dim != source.dim:
            raise DimensionError(f"source has {source.dim} dims, target has {extra_target.dim}")
        if extra_target.num_classes != source.num_classes:
            raise LabelingError("source and target declare different class counts")
    if config.optimizer not in _OPTIMIZERS:
        raise TrainingError(f"unknown optimizer {config.optimizer!r}")

    shape = (source.num_classes, source.dim + 1)
    if init is not None:
        if init.weights.shape != shape:
            raise DimensionError(f"initial weights have shape {init.weights.shape}, expected {shape}")
        weights = init.weights.copy()
    else:
        weights = np.zeros(shape)
    optimizer = _OPTIMIZERS[config.optimizer](shape, config.lr)
    order_rng = np.random.default_rng(derive_seed(seed, _ORDER_STREAM))

    early_stop = config.early_stop and validate is not None
    best_score, best_weights, best_epoch, stale = -np.inf, weights.copy(), 0, 0
    epochs_run = 0

    for epoch in range(1, config.epochs + 1):
        source_pool = rebalance(source, derive_seed(seed, _SOURCE_STREAM, epoch))
        target_pool = (
            rebalance(extra_target, derive_seed(seed, _TARGET_STREAM, epoch))
            if extra_target is not None
            else None
        )
        losses = []
        for x, y in _epoch_batches(source_pool, target_pool, config.batch_size, order_rng):
            loss, grad = loss_and_grad(weights, x, y, config.weight_decay)
            if not np.isfinite(loss) or not np.isfinite(grad).all():
                raise TrainingError("loss diverged", epoch=epoch)
            weights = optimizer.step(weights, grad)
            losses.append(loss)
        epochs_run = epoch
        logger.debug("epoch %d: mean loss %.5f", epoch, float(np.mean(losses)))

        if early_stop:
            score = validate(Classifier(weights=weights.copy(), config=config, seed=seed, epochs_run=epoch))
            if score > best_score:
                best_score, best_weights, best_epoch, stale = score, weights.copy(), epoch, 0
            else:
                stale += 1
                if stale >= config.patience:
                    logger.debug("early stop at epoch %d (best %d)", epoch, best_epoch)
                    break

    if early_stop and best_epoch > 0:
        weights, epochs_run = best_weights, best_epoch
    return Classifier(weights=weights, config=config, seed=seed, epochs_run=epochs_run)
