"""Trainable text classifier driving uncertainty sampling.

Features are hashed bags of words: unigrams plus adjacent bigrams, FNV-1a
hashed into a fixed 2^18-dimensional space (collisions accepted).  The model
is multinomial logistic regression trained by mini-batch gradient descent
with L2 regularization; training is deterministic for a given seed, so
retrains are reproducible.  Probabilities come from a softmax, which is
calibrated enough for least-confidence uncertainty ranking.
"""
from __future__ import annotations

import base64
import json
import math
from dataclasses import dataclass, asdict
from typing import Sequence

import numpy as np

from .filterlang import tokenize

HASH_DIM = 2 ** 18

_FNV_OFFSET = 0xCBF29CE484222325
_FNV_PRIME = 0x100000001B3
_MASK64 = 0xFFFFFFFFFFFFFFFF

FeatureVector = dict[int, int]


def _fnv1a(data: bytes) -> int:
    h = _FNV_OFFSET
    for b in data:
        h ^= b
        h = (h * _FNV_PRIME) & _MASK64
    return h


def featurize(text: str, dim: int = HASH_DIM) -> FeatureVector:
    """Hashed unigram+bigram counts.  Deterministic; empty text is valid."""
    toks = tokenize(text).tokens
    feats: FeatureVector = {}
    for tok in toks:
        idx = _fnv1a(tok.encode("utf-8")) % dim
        feats[idx] = feats.get(idx, 0) + 1
    for a, b in zip(toks, toks[1:]):
        idx = _fnv1a((a + "\x1f" + b).encode("utf-8")) % dim
        feats[idx] = feats.get(idx, 0) + 1
    return feats


@dataclass
class Hyperparams:
    learning_rate: float = 0.5
    epochs: int = 30
    l2: float = 1e-4
    batch_size: int = 32


@dataclass(frozen=True)
class LabelledExample:
    doc_id: str
    features: FeatureVector
    label: str
    weight: float = 1.0


@dataclass
class Model:
    version: int
    classes: tuple[str, ...]
    weights: np.ndarray  # (C, dim)
    biases: np.ndarray  # (C,)
    dim: int
    trained_on: int
    hyperparams: Hyperparams

    def __post_init__(self):
        assert len(self.classes) >= 2


class TrainingError(ValueError):
    pass


def _dense_rows(examples: Sequence[LabelledExample]):
    """Per-example sparse (indices, counts) arrays, insertion-order stable."""
    idx_arrays = []
    cnt_arrays = []
    for ex in examples:
        if ex.features:
            items = sorted(ex.features.items())
            idx_arrays.append(np.fromiter((i for i, _ in items), dtype=np.int64, count=len(items)))
            cnt_arrays.append(np.fromiter((c for _, c in items), dtype=np.float64, count=len(items)))
        else:
            idx_arrays.append(np.empty(0, dtype=np.int64))
            cnt_arrays.append(np.empty(0, dtype=np.float64))
    return idx_arrays, cnt_arrays


def _softmax(z: np.ndarray) -> np.ndarray:
    z = z - z.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


def loss_and_gradient(weights: np.ndarray, biases: np.ndarray,
                      examples: Sequence[LabelledExample],
                      classes: Sequence[str], l2: float):
    """Mean L2-regularized cross-entropy and its analytic gradient.

    Exposed separately so the gradient can be checked against finite
    differences.
    """
    class_index = {c: i for i, c in enumerate(classes)}
    idx_arrays, cnt_arrays = _dense_rows(examples)
    grad_w = np.zeros_like(weights)
    grad_b = np.zeros_like(biases)
    total = 0.0
    wsum = 0.0
    for ex, idx, cnt in zip(examples, idx_arrays, cnt_arrays):
        y = class_index[ex.label]
        z = weights[:, idx] @ cnt + biases
        p = _softmax(z)
        total += -ex.weight * math.log(max(p[y], 1e-300))
        delta = (p - np.eye(len(classes))[y]) * ex.weight
        grad_w[:, idx] += np.outer(delta, cnt)
        grad_b += delta
        wsum += ex.weight
    loss = total / wsum + 0.5 * l2 * float((weights * weights).sum())
    grad_w = grad_w / wsum + l2 * weights
    grad_b = grad_b / wsum
    return loss, grad_w, grad_b


def train(examples: Sequence[LabelledExample],
          hyperparams: Hyperparams | None = None,
          seed: int = 0,
          dim: int = HASH_DIM,
          base_version: int = 0,
          loss_trace: list[float] | None = None) -> Model:
    """Fit multinomial logistic regression; deterministic per seed."""
    hp = hyperparams or Hyperparams()
    if not examples:
        raise TrainingError("no training examples")
    classes = tuple(sorted({ex.label for ex in examples}))
    if len(classes) < 2:
        raise TrainingError(f"need >=2 classes, got {classes}")
    class_index = {c: i for i, c in enumerate(classes)}

    idx_arrays, cnt_arrays = _dense_rows(examples)
    labels = np.array([class_index[ex.label] for ex in examples])
    sample_w = np.array([ex.weight for ex in examples])
    n = len(examples)
    c = len(classes)
    weights = np.zeros((c, dim))
    biases = np.zeros(c)
    eye = np.eye(c)

    rng = np.random.default_rng(seed)
    batch = max(1, min(hp.batch_size, n))
    for _ in range(hp.epochs):
        order = rng.permutation(n)
        for start in range(0, n, batch):
            sel = order[start:start + batch]
            grad_w = np.zeros_like(weights)
            grad_b = np.zeros_like(biases)
            bw = 0.0
            for j in sel:
                idx, cnt = idx_arrays[j], cnt_arrays[j]
                z = weights[:, idx] @ cnt + biases
                p = _softmax(z)
                delta = (p - eye[labels[j]]) * sample_w[j]
                grad_w[:, idx] += np.outer(delta, cnt)
                grad_b += delta
                bw += sample_w[j]
            weights -= hp.learning_rate * (grad_w / bw + hp.l2 * weights)
            biases -= hp.learning_rate * (grad_b / bw)
        if loss_trace is not None:
            loss, _, _ = loss_and_gradient(weights, biases, examples, classes, hp.l2)
            loss_trace.append(loss)

    return Model(version=base_version + 1, classes=classes, weights=weights,
                 biases=biases, dim=dim, trained_on=n, hyperparams=hp)


def predict(model: Model, features: FeatureVector) -> np.ndarray:
    """Probability vector over model.classes; sums to 1."""
    if features:
        idx = np.fromiter(features.keys(), dtype=np.int64, count=len(features))
        cnt = np.fromiter(features.values(), dtype=np.float64, count=len(features))
        z = model.weights[:, idx] @ cnt + model.biases
    else:
        z = model.biases.copy()
    return _softmax(z)


def predict_label(model: Model, features: FeatureVector) -> tuple[str, np.ndarray]:
    probs = predict(model, features)
    return model.classes[int(np.argmax(probs))], probs


def uncertainty(probabilities: Sequence[float] | np.ndarray,
                method: str = "least_confidence") -> float:
    """Uncertainty in [0,1]; default is least confidence (1 - max p)."""
    p = np.asarray(probabilities, dtype=np.float64)
    if method == "least_confidence":
        return float(1.0 - p.max())
    if method == "margin":
        top = np.sort(p)[::-1]
        return float(1.0 - (top[0] - top[1]))
    if method == "entropy":
        nz = p[p > 0]
        return float(-(nz * np.log(nz)).sum() / math.log(len(p)))
    raise ValueError(f"unknown uncertainty method: {method!r}")


@dataclass
class RetrainConfig:
    batch_threshold: int = 50
    max_interval: float = 86400.0  # seconds
    uncertainty_method: str = "least_confidence"


def retrain_trigger(new_consensus_count: int, elapsed: float,
                    config: RetrainConfig) -> bool:
    """Retrain once enough new consensus labels or enough time has passed."""
    if new_consensus_count >= config.batch_threshold:
        return True
    return new_consensus_count >= 1 and elapsed >= config.max_interval


# ---------------------------------------------------------------------------
# serialization: sparse columns, exact float64 bytes, so load(save(m)) gives
# bit-identical predictions

def save_model(model: Model, path: str) -> None:
    nz_cols = np.flatnonzero((model.weights != 0).any(axis=0))
    payload = {
        "format": 1,
        "version": model.version,
        "classes": list(model.classes),
        "dim": model.dim,
        "trained_on": model.trained_on,
        "hyperparams": asdict(model.hyperparams),
        "nonzero_cols": nz_cols.tolist(),
        "weights_b64": base64.b64encode(
            np.ascontiguousarray(model.weights[:, nz_cols]).tobytes()).decode("ascii"),
        "biases_b64": base64.b64encode(
            np.ascontiguousarray(model.biases).tobytes()).decode("ascii"),
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh)


def load_model(path: str) -> Model:
    with open(path, encoding="utf-8") as fh:
        payload = json.load(fh)
    classes = tuple(payload["classes"])
    dim = payload["dim"]
    nz_cols = np.array(payload["nonzero_cols"], dtype=np.int64)
    flat = np.frombuffer(base64.b64decode(payload["weights_b64"]), dtype=np.float64)
    weights = np.zeros((len(classes), dim))
    if nz_cols.size:
        weights[:, nz_cols] = flat.reshape(len(classes), nz_cols.size)
    biases = np.frombuffer(base64.b64decode(payload["biases_b64"]), dtype=np.float64).copy()
    return Model(version=payload["version"], classes=classes, weights=weights,
                 biases=biases, dim=dim, trained_on=payload["trained_on"],
                 hyperparams=Hyperparams(**payload["hyperparams"]))
