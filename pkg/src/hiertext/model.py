"""Softmax classifier trained by mini-batch Adam on focal or cross-entropy loss.

Focal loss for one example with true-class probability ``p_t``::

    FL = -alpha_t * w_t * (1 - p_t) ** gamma * ln(p_t)

``alpha_t`` is the focal weighting factor (scalar or per class) and ``w_t`` an
optional balanced class weight; the two multiply. With ``gamma = 0`` and
``alpha = 1`` this is cross-entropy. ``p_t`` is clamped to
``[1e-12, 1 - 1e-12]`` before the log.

Writing ``z`` for the logits, the gradient of FL with respect to ``z`` is
``g * (p - onehot)`` with
``g = alpha_t * w_t * ((1 - p_t) ** gamma - gamma * (1 - p_t) ** (gamma - 1) * p_t * ln(p_t))``.
"""

from __future__ import annotations

import json
import struct
import zlib
from dataclasses import asdict, dataclass, field, replace
from typing import Optional, Sequence, Union

import numpy as np
import scipy.sparse as sp

from .data import Dataset, class_weights as balanced_class_weights, dataset_stats
from .errors import CorruptModel, DimensionMismatch, EmptyDataset
from .features import (FeatureVector, Featurizer, FeaturizerConfig, fit_featurizer,
                       stack, transform_many)
from .hashing import SplitMix64, derive_seed
from .predictions import PredictionSet
from .taxonomy import Level, label_from_key

P_CLAMP = 1e-12


@dataclass(frozen=True)
class FocalLossConfig:
    alpha: Union[float, tuple] = 1.0
    gamma: float = 2.0

    def __post_init__(self):
        if self.gamma < 0:
            raise ValueError(f"gamma must be >= 0, got {self.gamma}")
        alpha = self.alpha
        if np.ndim(alpha):
            alpha = tuple(float(a) for a in alpha)
            object.__setattr__(self, "alpha", alpha)
            if any(a <= 0 for a in alpha):
                raise ValueError("alpha entries must be > 0")
        elif alpha <= 0:
            raise ValueError(f"alpha must be > 0, got {alpha}")

    def alpha_for(self, class_idx):
        if np.ndim(self.alpha):
            return np.asarray(self.alpha)[class_idx]
        return self.alpha


CROSS_ENTROPY = FocalLossConfig(alpha=1.0, gamma=0.0)


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 2e-5
    epochs: int = 6
    batch_size: int = 6
    loss: str = "cross_entropy"
    focal: FocalLossConfig = field(default_factory=FocalLossConfig)
    # None, "balanced", or one weight per class in taxonomy order
    class_weights: Union[None, str, tuple] = None
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    seed: int = 42

    def __post_init__(self):
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be > 0")
        if self.epochs < 0:
            raise ValueError("epochs must be >= 0")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if self.loss not in ("cross_entropy", "focal"):
            raise ValueError(f"loss must be 'cross_entropy' or 'focal', got {self.loss!r}")
        if isinstance(self.class_weights, str):
            if self.class_weights != "balanced":
                raise ValueError("class_weights must be null, 'balanced' or a list")
        elif self.class_weights is not None:
            object.__setattr__(self, "class_weights", tuple(float(w) for w in self.class_weights))

    @property
    def loss_config(self) -> FocalLossConfig:
        return self.focal if self.loss == "focal" else CROSS_ENTROPY

    def to_dict(self) -> dict:
        d = asdict(self)
        if isinstance(d["focal"]["alpha"], tuple):
            d["focal"]["alpha"] = list(d["focal"]["alpha"])
        if isinstance(d["class_weights"], tuple):
            d["class_weights"] = list(d["class_weights"])
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "TrainConfig":
        d = dict(d)
        if isinstance(d.get("focal"), dict):
            d["focal"] = FocalLossConfig(**d["focal"])
        return cls(**d)


# "paper" holds the transformer fine-tuning settings unchanged; a linear model
# trained from zero needs a much larger step to converge in a handful of epochs.
PROFILES = {
    "paper": TrainConfig(learning_rate=2e-5, epochs=6, batch_size=6),
    "desk": TrainConfig(learning_rate=0.05, epochs=6, batch_size=32),
}


@dataclass
class ModelParams:
    weights: np.ndarray
    bias: np.ndarray
    class_list: tuple

    @classmethod
    def zeros(cls, class_list: Sequence, dimension: int) -> "ModelParams":
        k = len(class_list)
        return cls(np.zeros((k, dimension)), np.zeros(k), tuple(class_list))

    @property
    def dimension(self) -> int:
        return self.weights.shape[1]

    def copy(self) -> "ModelParams":
        return ModelParams(self.weights.copy(), self.bias.copy(), self.class_list)


@dataclass
class Gradient:
    weights: np.ndarray
    bias: np.ndarray


def softmax(logits: np.ndarray) -> np.ndarray:
    z = logits - logits.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


def forward_probs(params: ModelParams, x: FeatureVector) -> np.ndarray:
    if x.dimension != params.dimension:
        raise DimensionMismatch(f"feature dimension {x.dimension} != model dimension {params.dimension}")
    logits = params.weights[:, x.indices] @ x.values + params.bias
    return softmax(logits)


def focal_loss(p, true_class: int, cfg: FocalLossConfig = FocalLossConfig(),
               class_weight: Optional[float] = None) -> float:
    p_t = min(max(float(np.asarray(p)[true_class]), P_CLAMP), 1.0 - P_CLAMP)
    w_t = 1.0 if class_weight is None else float(class_weight)
    return float(-cfg.alpha_for(true_class) * w_t * (1.0 - p_t) ** cfg.gamma * np.log(p_t))


def _per_example_factors(p_t: np.ndarray, gamma: float):
    """Per-example loss (without alpha/weight) and the scalar ``g`` of the logit gradient."""
    clamped = np.clip(p_t, P_CLAMP, 1.0 - P_CLAMP)
    q = 1.0 - clamped
    log_p = np.log(clamped)
    loss = -(q ** gamma) * log_p
    if gamma == 0:
        g = np.ones_like(clamped)
    else:
        g = q ** gamma - gamma * q ** (gamma - 1.0) * clamped * log_p
    # clamp is flat outside the bounds, so the derivative there is zero
    g = np.where((p_t < P_CLAMP) | (p_t > 1.0 - P_CLAMP), 0.0, g)
    return loss, g


def _batch_loss_grad(W, b, X: sp.csr_matrix, y: np.ndarray, loss_cfg: FocalLossConfig,
                     weight_vec: Optional[np.ndarray]):
    n = X.shape[0]
    probs = softmax(np.asarray(X @ W.T) + b)
    rows = np.arange(n)
    p_t = probs[rows, y]
    loss, g = _per_example_factors(p_t, loss_cfg.gamma)
    scale = np.broadcast_to(np.asarray(loss_cfg.alpha_for(y), dtype=np.float64), (n,)).copy()
    if weight_vec is not None:
        scale = scale * weight_vec[y]
    loss = loss * scale
    g = g * scale
    dz = probs
    dz[rows, y] -= 1.0
    dz *= (g / n)[:, None]
    grad_w = (sp.csr_matrix(dz.T) @ X).toarray()
    grad_b = dz.sum(axis=0)
    return float(loss.sum() / n), grad_w, grad_b


def _weight_vector(cfg: TrainConfig, class_list: Sequence, ds: Optional[Dataset] = None):
    if cfg.class_weights is None:
        return None
    if cfg.class_weights == "balanced":
        if ds is None:
            raise ValueError("balanced class weights need the training dataset")
        w = balanced_class_weights(dataset_stats(ds))
        # classes absent from the data never appear as targets; their weight is unused
        return np.array([w.get(c, 1.0) for c in class_list])
    if len(cfg.class_weights) != len(class_list):
        raise ValueError(f"{len(cfg.class_weights)} class weights for {len(class_list)} classes")
    return np.array(cfg.class_weights, dtype=np.float64)


def loss_and_gradient(params: ModelParams, batch: Sequence, cfg: TrainConfig):
    """Mean loss over ``batch`` and its exact gradient.

    ``batch`` is a sequence of ``(FeatureVector, class_index)`` pairs.
    ``cfg.class_weights`` must be an explicit vector here; ``"balanced"`` is
    resolved against a dataset by :func:`train`.
    """
    if not batch:
        raise ValueError("batch must be non-empty")
    X = stack([x for x, _ in batch], params.dimension)
    y = np.array([c for _, c in batch], dtype=np.int64)
    weight_vec = _weight_vector(cfg, params.class_list)
    loss, gw, gb = _batch_loss_grad(params.weights, params.bias, X, y, cfg.loss_config, weight_vec)
    return loss, Gradient(gw, gb)


class Adam:
    """Adam with bias correction; updates parameter arrays in place."""

    def __init__(self, lr: float, beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8):
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.t = 0
        self.m: dict = {}
        self.v: dict = {}

    def step(self, params: dict, grads: dict) -> None:
        self.t += 1
        bc1 = 1.0 - self.beta1 ** self.t
        bc2 = 1.0 - self.beta2 ** self.t
        for name, value in params.items():
            g = grads[name]
            if name not in self.m:
                self.m[name] = np.zeros_like(value)
                self.v[name] = np.zeros_like(value)
            m, v = self.m[name], self.v[name]
            tmp = np.multiply(g, 1.0 - self.beta1)
            m *= self.beta1
            m += tmp
            np.multiply(g, g, out=tmp)
            tmp *= 1.0 - self.beta2
            v *= self.beta2
            v += tmp
            # value -= lr * (m / bc1) / (sqrt(v / bc2) + eps), without temporaries
            np.divide(v, bc2, out=tmp)
            np.sqrt(tmp, out=tmp)
            tmp += self.eps
            np.divide(m, tmp, out=tmp)
            tmp *= self.lr / bc1
            value -= tmp


@dataclass
class AdamState:
    m_weights: np.ndarray
    v_weights: np.ndarray
    m_bias: np.ndarray
    v_bias: np.ndarray
    t: int = 0

    @classmethod
    def zeros_like(cls, params: ModelParams) -> "AdamState":
        return cls(np.zeros_like(params.weights), np.zeros_like(params.weights),
                   np.zeros_like(params.bias), np.zeros_like(params.bias))


def adam_step(state: AdamState, params: ModelParams, grad: Gradient, lr: float,
              beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8):
    """Functional Adam update; returns ``(new_params, new_state)`` and leaves inputs alone."""
    if state.m_weights.shape != params.weights.shape or state.m_bias.shape != params.bias.shape:
        raise DimensionMismatch("optimizer state does not match parameter shapes")
    opt = Adam(lr, beta1, beta2, eps)
    opt.t = state.t
    opt.m = {"weights": state.m_weights.copy(), "bias": state.m_bias.copy()}
    opt.v = {"weights": state.v_weights.copy(), "bias": state.v_bias.copy()}
    new = params.copy()
    opt.step({"weights": new.weights, "bias": new.bias},
             {"weights": grad.weights, "bias": grad.bias})
    return new, AdamState(opt.m["weights"], opt.v["weights"], opt.m["bias"], opt.v["bias"], opt.t)


@dataclass
class TrainResult:
    params: ModelParams
    loss_trace: list


def class_indices(ds: Dataset) -> np.ndarray:
    class_list = ds.class_list()
    pos = {c: i for i, c in enumerate(class_list)}
    return np.array([pos[lab] for lab in ds.labels()], dtype=np.int64)


def train(ds: Dataset, featurizer: Featurizer, cfg: TrainConfig,
          init: Optional[ModelParams] = None) -> TrainResult:
    """Train from zero weights (or ``init``) with seeded mini-batch Adam.

    The example order is reshuffled every epoch from a seed derived from
    ``cfg.seed``; the returned trace holds the mean training loss per epoch.
    """
    if ds.level is None:
        raise ValueError("training needs a dataset labelled at one level")
    class_list = ds.class_list()
    params = init.copy() if init is not None else ModelParams.zeros(class_list, featurizer.dimension)
    if cfg.epochs == 0:
        return TrainResult(params, [])
    if len(ds) == 0:
        raise EmptyDataset(f"no training examples at level {ds.level.value}")
    X = transform_many(featurizer, ds.texts)
    y = class_indices(ds)
    weight_vec = _weight_vector(cfg, class_list, ds)
    loss_cfg = cfg.loss_config
    opt = Adam(cfg.learning_rate, cfg.beta1, cfg.beta2, cfg.eps)
    arrays = {"weights": params.weights, "bias": params.bias}
    n = len(ds)
    trace = []
    for epoch in range(cfg.epochs):
        order = list(range(n))
        SplitMix64(derive_seed(cfg.seed, f"train/epoch/{epoch}")).shuffle(order)
        order = np.array(order, dtype=np.int64)
        total = 0.0
        for start in range(0, n, cfg.batch_size):
            rows = order[start:start + cfg.batch_size]
            loss, gw, gb = _batch_loss_grad(params.weights, params.bias, X[rows], y[rows],
                                            loss_cfg, weight_vec)
            opt.step(arrays, {"weights": gw, "bias": gb})
            total += loss * len(rows)
        trace.append(total / n)
    return TrainResult(params, trace)


def predict_matrix(params: ModelParams, X: sp.csr_matrix) -> np.ndarray:
    if X.shape[1] != params.dimension:
        raise DimensionMismatch(f"feature dimension {X.shape[1]} != model dimension {params.dimension}")
    return softmax(np.asarray(X @ params.weights.T) + params.bias)


def predict(params: ModelParams, featurizer: Featurizer, texts: Sequence[str],
            ids: Optional[Sequence[str]] = None, model_id: str = "model") -> PredictionSet:
    if featurizer.dimension != params.dimension:
        raise DimensionMismatch(
            f"featurizer dimension {featurizer.dimension} != model dimension {params.dimension}")
    texts = list(texts)
    ids = [str(i) for i in range(len(texts))] if ids is None else list(ids)
    probs = predict_matrix(params, transform_many(featurizer, texts)) if texts \
        else np.zeros((0, len(params.class_list)))
    return PredictionSet.from_probs(model_id, params.class_list, ids, probs)


@dataclass
class Model:
    """Trained parameters plus the featurizer they expect."""
    params: ModelParams
    featurizer: Featurizer
    metadata: dict = field(default_factory=dict)

    @property
    def level(self) -> Level:
        return self.params.class_list[0].level

    def predict(self, texts, ids=None, model_id="model") -> PredictionSet:
        return predict(self.params, self.featurizer, texts, ids, model_id)


MAGIC = b"HTXM"
FORMAT_VERSION = 1


def model_to_bytes(model: Model) -> bytes:
    params, feat = model.params, model.featurizer
    header = {
        "level": model.level.value,
        "class_list": [c.key for c in params.class_list],
        "dimension": params.dimension,
        "featurizer": feat.config.to_dict(),
        "fitted_on": feat.fitted_on,
        "has_idf": feat.idf is not None,
        "metadata": model.metadata,
    }
    header_bytes = json.dumps(header, sort_keys=True, separators=(",", ":")).encode("utf-8")
    parts = [MAGIC, struct.pack("<HI", FORMAT_VERSION, len(header_bytes)), header_bytes,
             np.ascontiguousarray(params.weights, dtype="<f8").tobytes(),
             np.ascontiguousarray(params.bias, dtype="<f8").tobytes()]
    if feat.idf is not None:
        parts.append(np.ascontiguousarray(feat.idf, dtype="<f8").tobytes())
    body = b"".join(parts)
    return body + struct.pack("<I", zlib.crc32(body) & 0xFFFFFFFF)


def model_from_bytes(blob: bytes) -> Model:
    if len(blob) < 10 or blob[:4] != MAGIC:
        raise CorruptModel("bad magic")
    version, header_len = struct.unpack_from("<HI", blob, 4)
    if version != FORMAT_VERSION:
        raise CorruptModel(f"unsupported version {version}")
    start = 10 + header_len
    if len(blob) < start + 4:
        raise CorruptModel("truncated header")
    try:
        header = json.loads(blob[10:start].decode("utf-8"))
        level = Level.parse(header["level"])
        class_list = tuple(label_from_key(k, level) for k in header["class_list"])
        d = int(header["dimension"])
        config = FeaturizerConfig.from_dict(header["featurizer"])
    except (ValueError, KeyError, TypeError) as exc:
        raise CorruptModel(f"bad header ({exc})") from None
    k = len(class_list)
    n_floats = k * d + k + (d if header.get("has_idf") else 0)
    if len(blob) != start + 8 * n_floats + 4:
        raise CorruptModel("truncated or oversized payload")
    (crc,) = struct.unpack_from("<I", blob, len(blob) - 4)
    if zlib.crc32(blob[:-4]) & 0xFFFFFFFF != crc:
        raise CorruptModel("checksum mismatch")
    arr = np.frombuffer(blob, dtype="<f8", count=n_floats, offset=start).astype(np.float64)
    weights = arr[:k * d].reshape(k, d).copy()
    bias = arr[k * d:k * d + k].copy()
    idf = arr[k * d + k:].copy() if header.get("has_idf") else None
    featurizer = Featurizer(config, idf, int(header.get("fitted_on", 0)))
    return Model(ModelParams(weights, bias, class_list), featurizer, header.get("metadata", {}))


def save_model(model: Model, path) -> None:
    with open(path, "wb") as fh:
        fh.write(model_to_bytes(model))


def load_model(path) -> Model:
    with open(path, "rb") as fh:
        return model_from_bytes(fh.read())


def fit_model(ds: Dataset, featurizer_config: FeaturizerConfig, cfg: TrainConfig) -> tuple:
    """Fit the featurizer on ``ds``, train, and bundle; returns ``(Model, loss_trace)``."""
    featurizer = fit_featurizer(featurizer_config, ds)
    result = train(ds, featurizer, cfg)
    meta = {"train_config": cfg.to_dict(), "n_train": len(ds),
            "loss_trace": list(result.loss_trace)}
    return Model(result.params, featurizer, meta), result.loss_trace


def with_overrides(cfg: TrainConfig, **kwargs) -> TrainConfig:
    return replace(cfg, **{k: v for k, v in kwargs.items() if v is not None})
