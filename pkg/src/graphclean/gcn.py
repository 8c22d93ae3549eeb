"""Stage 2: two-layer graph convolutional classifier with manual backprop.

logits = A_hat @ relu(A_hat @ X @ W1) @ W2 with the symmetric self-loop
normalization A_hat = D^{-1/2} (W + I) D^{-1/2}.  Training is plain
full-batch gradient descent on masked cross-entropy plus an L2 penalty
0.5 * weight_decay * (||W1||^2 + ||W2||^2); gradients are written out by
hand so they can be checked against finite differences.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .datasets import Dataset, Split
from .rng import SplitMix64

__all__ = [
    "GcnParams",
    "TrainConfig",
    "TrainReport",
    "TrainDivergence",
    "xavier_params",
    "normalize_adjacency",
    "forward",
    "softmax",
    "cross_entropy",
    "accuracy",
    "loss_and_gradients",
    "train",
]


class TrainDivergence(RuntimeError):
    def __init__(self, epoch: int):
        super().__init__(f"non-finite training loss at epoch {epoch}")
        self.epoch = epoch


@dataclass
class GcnParams:
    """Weight matrices of the two layers; biases are omitted."""

    W1: np.ndarray
    W2: np.ndarray

    def __post_init__(self):
        self.W1 = np.asarray(self.W1, dtype=np.float64)
        self.W2 = np.asarray(self.W2, dtype=np.float64)
        if self.W1.ndim != 2 or self.W2.ndim != 2 or self.W1.shape[1] != self.W2.shape[0]:
            raise ValueError(
                f"inconsistent parameter shapes {self.W1.shape} and {self.W2.shape}"
            )
        if not (np.isfinite(self.W1).all() and np.isfinite(self.W2).all()):
            raise ValueError("parameters contain non-finite entries")

    def copy(self) -> "GcnParams":
        return GcnParams(W1=self.W1.copy(), W2=self.W2.copy())


@dataclass(frozen=True)
class TrainConfig:
    hidden: int = 16
    epochs: int = 250
    learning_rate: float = 1e-2
    weight_decay: float = 5e-4
    seed: int = 0

    def __post_init__(self):
        if self.hidden < 1:
            raise ValueError(f"hidden width must be >= 1, got {self.hidden}")
        if self.epochs < 1:
            raise ValueError(f"epochs must be >= 1, got {self.epochs}")
        if self.learning_rate < 0:
            # 0 is allowed: a null update leaves the parameters untouched
            raise ValueError(f"learning_rate must be >= 0, got {self.learning_rate}")
        if self.weight_decay < 0:
            raise ValueError(f"weight_decay must be >= 0, got {self.weight_decay}")

    def to_dict(self) -> dict:
        return {
            "hidden": self.hidden,
            "epochs": self.epochs,
            "learning_rate": self.learning_rate,
            "weight_decay": self.weight_decay,
            "seed": self.seed,
        }


@dataclass(frozen=True)
class TrainReport:
    loss_trace: list
    val_accuracy_trace: list
    best_val_epoch: int
    test_accuracy: float

    def to_json_dict(self) -> dict:
        return {
            "loss_trace": [float(x) for x in self.loss_trace],
            "val_accuracy_trace": [float(x) for x in self.val_accuracy_trace],
            "best_val_epoch": self.best_val_epoch,
            "test_accuracy": self.test_accuracy,
        }


def xavier_params(feature_dim: int, hidden: int, num_classes: int,
                  seed: int) -> GcnParams:
    """Seeded uniform init in +-sqrt(6 / (fan_in + fan_out)) per layer.

    Entries are drawn row-major, W1 before W2, from one SplitMix64 stream.
    """
    rng = SplitMix64(seed)

    def layer(fan_in: int, fan_out: int) -> np.ndarray:
        limit = np.sqrt(6.0 / (fan_in + fan_out))
        flat = 2.0 * rng.uniforms(fan_in * fan_out) - 1.0
        return limit * flat.reshape(fan_in, fan_out)

    return GcnParams(W1=layer(feature_dim, hidden), W2=layer(hidden, num_classes))


def normalize_adjacency(W: np.ndarray) -> np.ndarray:
    """D^{-1/2} (W + I) D^{-1/2} with D the degree matrix of W + I.

    Rows of isolated nodes reduce to a unit self-loop.
    """
    W = np.asarray(W, dtype=np.float64)
    if W.ndim != 2 or W.shape[0] != W.shape[1]:
        raise ValueError(f"adjacency must be square, got shape {W.shape}")
    if np.any(W < 0):
        raise ValueError("adjacency has negative weights")
    with_loops = W + np.eye(W.shape[0])
    inv_sqrt = 1.0 / np.sqrt(with_loops.sum(axis=1))
    return inv_sqrt[:, None] * with_loops * inv_sqrt[None, :]


def forward(params: GcnParams, A_hat: np.ndarray, X: np.ndarray) -> np.ndarray:
    """logits = A_hat @ relu(A_hat @ X @ W1) @ W2."""
    X = np.asarray(X, dtype=np.float64)
    A_hat = np.asarray(A_hat, dtype=np.float64)
    if X.shape[1] != params.W1.shape[0] or A_hat.shape[1] != X.shape[0]:
        raise ValueError(
            f"shape mismatch: A_hat {A_hat.shape}, X {X.shape}, W1 {params.W1.shape}"
        )
    hidden = np.maximum(A_hat @ X @ params.W1, 0.0)
    logits = A_hat @ hidden @ params.W2
    if not np.isfinite(logits).all():
        raise FloatingPointError("non-finite logits in forward pass")
    return logits


def softmax(logits: np.ndarray) -> np.ndarray:
    """Row-wise softmax with max-shift stabilization."""
    shifted = logits - logits.max(axis=1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=1, keepdims=True)


def _check_mask(mask, n: int) -> np.ndarray:
    mask = np.asarray(mask, dtype=np.int64)
    if mask.size == 0:
        raise ValueError("mask must be non-empty")
    if mask.min() < 0 or mask.max() >= n:
        raise ValueError(f"mask references nodes outside [0, {n})")
    return mask


def cross_entropy(logits: np.ndarray, labels: np.ndarray, mask) -> float:
    """Mean of -log softmax(logits_i)[y_i] over the masked nodes."""
    logits = np.asarray(logits, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.int64)
    mask = _check_mask(mask, logits.shape[0])
    sub = logits[mask]
    shifted = sub - sub.max(axis=1, keepdims=True)
    log_norm = np.log(np.exp(shifted).sum(axis=1))
    picked = shifted[np.arange(mask.size), labels[mask]]
    return float(np.mean(log_norm - picked))


def accuracy(logits: np.ndarray, labels: np.ndarray, mask) -> float:
    """Fraction of masked nodes whose argmax logit matches the label.

    Ties go to the lowest class index.
    """
    logits = np.asarray(logits, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.int64)
    mask = _check_mask(mask, logits.shape[0])
    predicted = logits[mask].argmax(axis=1)
    return float(np.mean(predicted == labels[mask]))


def loss_and_gradients(params: GcnParams, A_hat: np.ndarray, X: np.ndarray,
                       labels: np.ndarray, mask, weight_decay: float):
    """Training loss (cross-entropy + L2) and its exact parameter gradients."""
    A_hat = np.asarray(A_hat, dtype=np.float64)
    X = np.asarray(X, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.int64)
    mask = _check_mask(mask, X.shape[0])

    XW = A_hat @ X @ params.W1
    hidden = np.maximum(XW, 0.0)
    prop_hidden = A_hat @ hidden
    logits = prop_hidden @ params.W2

    probs = softmax(logits)
    loss = cross_entropy(logits, labels, mask)
    loss += 0.5 * weight_decay * (
        float(np.sum(params.W1 * params.W1)) + float(np.sum(params.W2 * params.W2))
    )

    d_logits = np.zeros_like(probs)
    d_logits[mask] = probs[mask]
    d_logits[mask, labels[mask]] -= 1.0
    d_logits /= mask.size

    grad_W2 = prop_hidden.T @ d_logits + weight_decay * params.W2
    d_hidden = (A_hat @ (d_logits @ params.W2.T)) * (XW > 0.0)
    grad_W1 = (A_hat @ X).T @ d_hidden + weight_decay * params.W1
    return loss, grad_W1, grad_W2


def train(dataset: Dataset, A_hat: np.ndarray, split: Split,
          config: TrainConfig) -> tuple[GcnParams, TrainReport]:
    """Full-batch gradient descent on the train mask, model selection on val.

    Each epoch records the pre-update training loss and the post-update
    validation accuracy; the returned parameters are the snapshot from the
    best-validation epoch (ties to the earliest).  Deterministic per seed.
    """
    split.validate_for(dataset.n)
    for name in ("train", "val", "test"):
        if getattr(split, name).size == 0:
            raise ValueError(f"{name} split must be non-empty")

    params = xavier_params(dataset.feature_dim, config.hidden,
                           dataset.num_classes, config.seed)
    X, y = dataset.features, dataset.labels

    loss_trace: list[float] = []
    val_trace: list[float] = []
    best_acc = -1.0
    best_epoch = 0
    best_params = params.copy()
    for epoch in range(config.epochs):
        loss, g1, g2 = loss_and_gradients(params, A_hat, X, y, split.train,
                                          config.weight_decay)
        if not np.isfinite(loss):
            raise TrainDivergence(epoch)
        loss_trace.append(loss)
        params.W1 = params.W1 - config.learning_rate * g1
        params.W2 = params.W2 - config.learning_rate * g2
        val_acc = accuracy(forward(params, A_hat, X), y, split.val)
        val_trace.append(val_acc)
        if val_acc > best_acc:
            best_acc = val_acc
            best_epoch = epoch
            best_params = params.copy()

    test_acc = accuracy(forward(best_params, A_hat, X), y, split.test)
    report = TrainReport(
        loss_trace=loss_trace,
        val_accuracy_trace=val_trace,
        best_val_epoch=best_epoch,
        test_accuracy=test_acc,
    )
    return best_params, report
