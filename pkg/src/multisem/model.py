"""A small two-head network trained from scratch with plain mini-batch gradient descent.

Architecture::

    x --[dense + tanh]*L--> h --+--[dense]--> fine logits   (T, one per fine label)
                                +--[dense]--> coarse logits (M, one per coarse label)

The extractor nonlinearity is ``tanh`` (derivative ``1 - tanh^2``). Weights
are drawn from N(0, 1/fan_in); biases start at zero.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from multisem.errors import ConfigError, DimensionMismatch, ParseError
from multisem.losses import (
    FocalConfig,
    bce_fine_loss,
    coarse_ce_loss,
    focal_fine_loss,
    sigmoid_vec,
    softmax,
    total_loss,
)

ACTIVATION = "tanh"
FINE_LOSSES = ("focal", "bce")
MODES = ("two_level", "coarse_only")


@dataclass
class Dense:
    weight: np.ndarray
    bias: np.ndarray

    def copy(self):
        return Dense(self.weight.copy(), self.bias.copy())


@dataclass
class ModelParams:
    extractor: list
    fine_head: Dense
    coarse_head: Dense
    fine_path: str = "softmax"
    activation: str = ACTIVATION

    @property
    def dims(self):
        return {
            "feature_dim": int(self.extractor[0].weight.shape[0]),
            "hidden_dim": int(self.extractor[-1].weight.shape[1]),
            "t_fine": int(self.fine_head.weight.shape[1]),
            "m_coarse": int(self.coarse_head.weight.shape[1]),
            "n_layers": len(self.extractor),
        }

    def layers(self):
        return [*self.extractor, self.fine_head, self.coarse_head]

    def copy(self):
        return ModelParams([d.copy() for d in self.extractor], self.fine_head.copy(),
                           self.coarse_head.copy(), self.fine_path, self.activation)

    def flat(self):
        return np.concatenate([a.ravel() for d in self.layers() for a in (d.weight, d.bias)])

    def with_flat(self, vec):
        """A copy of these params with values taken from a flat vector (``flat`` order)."""
        out = self.copy()
        pos = 0
        for d in out.layers():
            for name in ("weight", "bias"):
                arr = getattr(d, name)
                setattr(d, name, np.asarray(vec[pos:pos + arr.size], dtype=float).reshape(arr.shape))
                pos += arr.size
        return out


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 50
    batch_size: int = 32
    learning_rate: float = 0.1
    seed: int = 0
    fine_loss: str = "focal"
    mode: str = "two_level"
    focal: FocalConfig = field(default_factory=FocalConfig)
    hidden_dim: int = 32
    n_layers: int = 1

    def check(self):
        if self.epochs < 1 or self.batch_size < 1:
            raise ConfigError("epochs and batch_size must be >= 1")
        if not (self.learning_rate >= 0 and math.isfinite(self.learning_rate)):
            raise ConfigError("learning_rate must be finite and >= 0")
        if self.fine_loss not in FINE_LOSSES:
            raise ConfigError(f"fine_loss must be one of {FINE_LOSSES}")
        if self.mode not in MODES:
            raise ConfigError(f"mode must be one of {MODES}")

    @property
    def fine_path(self):
        return "softmax" if self.fine_loss == "focal" else "sigmoid"


@dataclass
class TrainTrace:
    total: list = field(default_factory=list)
    fine: list = field(default_factory=list)
    coarse: list = field(default_factory=list)

    def to_dict(self):
        return {"total": self.total, "fine": self.fine, "coarse": self.coarse}

    def to_json(self):
        return json.dumps(self.to_dict()) + "\n"


def init(seed, feature_dim, hidden_dim, t_fine, m_coarse, n_layers=1, fine_path="softmax"):
    for name, v in (("feature_dim", feature_dim), ("hidden_dim", hidden_dim), ("t_fine", t_fine),
                    ("m_coarse", m_coarse), ("n_layers", n_layers)):
        if int(v) < 1:
            raise ConfigError(f"{name} must be >= 1, got {v}")
    rng = np.random.default_rng(seed)

    def dense(n_in, n_out):
        return Dense(rng.normal(0.0, 1.0 / math.sqrt(n_in), (n_in, n_out)), np.zeros(n_out))

    extractor = [dense(feature_dim if i == 0 else hidden_dim, hidden_dim) for i in range(n_layers)]
    return ModelParams(extractor, dense(hidden_dim, t_fine), dense(hidden_dim, m_coarse), fine_path)


def _extract(params, x):
    acts = [x]
    for d in params.extractor:
        acts.append(np.tanh(acts[-1] @ d.weight + d.bias))
    return acts


def forward(params: ModelParams, x):
    """Fine and coarse logits for one sample ``(D,)`` or a batch ``(N, D)``."""
    x = np.asarray(x, dtype=float)
    d = params.dims["feature_dim"]
    if x.shape[-1] != d:
        raise DimensionMismatch(f"feature vector has length {x.shape[-1]}, model expects {d}")
    hidden = _extract(params, x)[-1]
    return hidden @ params.fine_head.weight + params.fine_head.bias, hidden @ params.coarse_head.weight + params.coarse_head.bias


def predict_scores(params: ModelParams, x):
    fine, coarse = forward(params, x)
    fine_scores = softmax(fine) if params.fine_path == "softmax" else sigmoid_vec(fine)
    return fine_scores, softmax(coarse)


def loss_and_grad(params: ModelParams, x, fine_targets, coarse_targets, cfg: TrainConfig):
    """Batch-summed loss and its gradient for every parameter.

    Returns ``(total, fine_value, coarse_value, grads)`` where ``grads``
    mirrors ``params``.
    """
    x = np.atleast_2d(np.asarray(x, dtype=float))
    acts = _extract(params, x)
    hidden = acts[-1]
    zf = hidden @ params.fine_head.weight + params.fine_head.bias
    zc = hidden @ params.coarse_head.weight + params.coarse_head.bias

    coarse = coarse_ce_loss(zc, coarse_targets)
    fine = None
    if cfg.mode == "two_level":
        if cfg.fine_loss == "focal":
            fine = focal_fine_loss(zf, fine_targets, cfg.focal)
        else:
            fine = bce_fine_loss(zf, fine_targets)
    tot = total_loss(fine, coarse)
    dzf = tot.fine_grad if tot.fine_grad is not None else np.zeros_like(zf)
    dzc = tot.coarse_grad

    grads = params.copy()
    grads.fine_head = Dense(hidden.T @ dzf, dzf.sum(axis=0))
    grads.coarse_head = Dense(hidden.T @ dzc, dzc.sum(axis=0))
    dh = dzf @ params.fine_head.weight.T + dzc @ params.coarse_head.weight.T
    for i in range(len(params.extractor) - 1, -1, -1):
        da = dh * (1.0 - acts[i + 1] ** 2)
        grads.extractor[i] = Dense(acts[i].T @ da, da.sum(axis=0))
        dh = da @ params.extractor[i].weight.T
    return tot.value, (fine.value if fine is not None else 0.0), coarse.value, grads


def label_matrices(records, h):
    """Multi-hot fine targets ``(N, T)`` and coarse indices ``(N,)`` for ``records``."""
    y_fine = np.zeros((len(records), h.n_fine))
    y_coarse = np.empty(len(records), dtype=int)
    for i, r in enumerate(records):
        y_fine[i, sorted(h.fine_indices(r.fine))] = 1.0
        y_coarse[i] = h.coarse_index(r.coarse)
    return y_fine, y_coarse


def train(records, features, h, cfg: TrainConfig = TrainConfig(), params: ModelParams | None = None):
    """Mini-batch gradient descent; each step moves by ``lr * grad / batch_len``.

    The loss being minimised (and reported in the trace) is summed over
    samples; dividing the step by the batch length keeps the learning rate
    independent of ``batch_size``.
    """
    cfg.check()
    x = np.asarray(features, dtype=float)
    if x.ndim != 2 or x.shape[0] != len(records):
        raise DimensionMismatch(f"{len(records)} records but feature matrix of shape {x.shape}")
    y_fine, y_coarse = label_matrices(records, h)
    if params is None:
        params = init(cfg.seed, x.shape[1], cfg.hidden_dim, h.n_fine, h.n_coarse, cfg.n_layers, cfg.fine_path)
    else:
        params = params.copy()
    dims = params.dims
    if (dims["feature_dim"], dims["t_fine"], dims["m_coarse"]) != (x.shape[1], h.n_fine, h.n_coarse):
        raise DimensionMismatch(f"model dims {dims} do not fit data/hierarchy")

    rng = np.random.default_rng([cfg.seed, 1])
    trace = TrainTrace()
    n = x.shape[0]
    for _ in range(cfg.epochs):
        order = rng.permutation(n)
        ep_total = ep_fine = ep_coarse = 0.0
        for start in range(0, n, cfg.batch_size):
            idx = order[start:start + cfg.batch_size]
            tot, fv, cv, grads = loss_and_grad(params, x[idx], y_fine[idx], y_coarse[idx], cfg)
            ep_total += tot
            ep_fine += fv
            ep_coarse += cv
            if cfg.learning_rate > 0:
                scale = cfg.learning_rate / len(idx)
                for p, g in zip(params.layers(), grads.layers()):
                    p.weight -= scale * g.weight
                    p.bias -= scale * g.bias
        trace.total.append(ep_total)
        trace.fine.append(ep_fine)
        trace.coarse.append(ep_coarse)
    return params, trace


def _dense_to_dict(d):
    return {"weight": d.weight.tolist(), "bias": d.bias.tolist()}


def save_model(params: ModelParams) -> bytes:
    doc = {
        "dims": params.dims,
        "extractor": [_dense_to_dict(d) for d in params.extractor],
        "fine_head": _dense_to_dict(params.fine_head),
        "coarse_head": _dense_to_dict(params.coarse_head),
        "activation": params.activation,
        "fine_path": params.fine_path,
    }
    return (json.dumps(doc) + "\n").encode("utf-8")


def _dense_from_dict(obj, field_name, n_in, n_out):
    try:
        w = np.asarray(obj["weight"], dtype=float)
        b = np.asarray(obj["bias"], dtype=float)
    except (KeyError, TypeError, ValueError) as exc:
        raise ParseError(f"model field {field_name!r} malformed ({exc})") from None
    if w.shape != (n_in, n_out) or b.shape != (n_out,):
        raise ParseError(f"model field {field_name!r} has shape {w.shape}/{b.shape}, dims say ({n_in}, {n_out})")
    if not (np.all(np.isfinite(w)) and np.all(np.isfinite(b))):
        raise ParseError(f"model field {field_name!r} has non-finite values")
    return Dense(w, b)


def load_model(data) -> ModelParams:
    if isinstance(data, (bytes, bytearray)):
        data = data.decode("utf-8")
    try:
        doc = json.loads(data)
        dims = doc["dims"]
        d, hd, t, m = (int(dims[k]) for k in ("feature_dim", "hidden_dim", "t_fine", "m_coarse"))
        layers = doc["extractor"]
        fine_path = doc["fine_path"]
        activation = doc.get("activation", ACTIVATION)
    except json.JSONDecodeError as exc:
        raise ParseError(f"malformed model JSON: {exc.msg}", line=exc.lineno) from None
    except (KeyError, TypeError, ValueError) as exc:
        raise ParseError(f"model JSON missing or bad field {exc}") from None
    if activation != ACTIVATION:
        raise ParseError(f"unsupported activation {activation!r}")
    if fine_path not in ("softmax", "sigmoid"):
        raise ParseError(f"model field 'fine_path' must be softmax or sigmoid, got {fine_path!r}")
    if not isinstance(layers, list) or not layers or int(dims.get("n_layers", len(layers))) != len(layers):
        raise ParseError("model field 'extractor' disagrees with dims.n_layers")
    extractor = [
        _dense_from_dict(obj, f"extractor[{i}]", d if i == 0 else hd, hd) for i, obj in enumerate(layers)
    ]
    return ModelParams(
        extractor,
        _dense_from_dict(doc.get("fine_head"), "fine_head", hd, t),
        _dense_from_dict(doc.get("coarse_head"), "coarse_head", hd, m),
        fine_path,
        activation,
    )
