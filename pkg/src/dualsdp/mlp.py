"""Dense feed-forward network in numpy with hand-written backprop and Adam."""

from __future__ import annotations

import copy
import json
from dataclasses import dataclass, field
from typing import List, Optional, Sequence

import numpy as np

MODEL_VERSION = 1
ACTIVATIONS = ("softplus", "identity")

# hidden weights ~ U(-a, a), a = INIT_GAIN / sqrt(fan_in)
INIT_GAIN = 1.0


class ModelFormatError(ValueError):
    pass


def _softplus(z):
    return np.logaddexp(0.0, z)


def _sigmoid(z):
    return 0.5 * (1.0 + np.tanh(0.5 * z))


@dataclass
class AdamState:
    m: List[np.ndarray]
    v: List[np.ndarray]
    step: int = 0


@dataclass
class MlpModel:
    """Parameters are stored per layer as ``(W, b)`` with ``W`` of shape ``(fan_in, fan_out)``.

    The output is ``output_scale * (h_L @ W_L + b_L)`` where ``h_0`` is the
    normalised input ``(x - norm_mean) / norm_scale``.
    """

    layer_sizes: List[int]
    weights: List[np.ndarray]
    biases: List[np.ndarray]
    activation: str = "softplus"
    norm_mean: Optional[np.ndarray] = None
    norm_scale: Optional[np.ndarray] = None
    output_scale: float = 1.0
    adam: Optional[AdamState] = None

    def __post_init__(self):
        if self.activation not in ACTIVATIONS:
            raise ValueError(f"unknown activation {self.activation!r}")
        n_in = self.layer_sizes[0]
        if self.norm_mean is None:
            self.norm_mean = np.zeros(n_in)
        if self.norm_scale is None:
            self.norm_scale = np.ones(n_in)
        if np.any(np.asarray(self.norm_scale) <= 0):
            raise ValueError("normalisation scale must be positive")

    @property
    def n_inputs(self) -> int:
        return self.layer_sizes[0]

    @property
    def n_outputs(self) -> int:
        return self.layer_sizes[-1]

    def params(self) -> List[np.ndarray]:
        out = []
        for W, b in zip(self.weights, self.biases):
            out.extend([W, b])
        return out

    def copy(self) -> "MlpModel":
        return copy.deepcopy(self)

    def set_normalization(self, X: np.ndarray) -> None:
        """Freeze per-feature input statistics; constant features get scale 1."""
        X = np.asarray(X, dtype=float)
        self.norm_mean = X.mean(axis=0)
        std = X.std(axis=0)
        self.norm_scale = np.where(std > 1e-12, std, 1.0)


def init_mlp(
    n_inputs: int,
    n_outputs: int,
    hidden: Sequence[int] = (64, 64),
    activation: str = "softplus",
    seed: int = 0,
    output_gain: float = 0.1,
    output_scale: float = 1.0,
) -> MlpModel:
    """Uniform fan-in initialisation with zero biases.

    The last layer is additionally scaled by ``output_gain``; ``0`` gives a
    model that outputs exactly zero.
    """
    rng = np.random.default_rng(seed)
    sizes = [int(n_inputs), *[int(h) for h in hidden], int(n_outputs)]
    weights, biases = [], []
    for k, (fan_in, fan_out) in enumerate(zip(sizes[:-1], sizes[1:])):
        a = INIT_GAIN / np.sqrt(fan_in)
        W = rng.uniform(-a, a, size=(fan_in, fan_out))
        if k == len(sizes) - 2:
            W *= output_gain
        weights.append(W)
        biases.append(np.zeros(fan_out))
    return MlpModel(sizes, weights, biases, activation=activation, output_scale=output_scale)


def forward(model: MlpModel, X: np.ndarray):
    """Batch forward pass. Returns ``(outputs, cache)`` for :func:`backprop`."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    if X.shape[1] != model.n_inputs:
        raise ValueError(f"expected {model.n_inputs} input features, got {X.shape[1]}")
    h = (X - model.norm_mean) / model.norm_scale
    pre, post = [], [h]
    last = len(model.weights) - 1
    for k, (W, b) in enumerate(zip(model.weights, model.biases)):
        z = h @ W + b
        if k < last:
            pre.append(z)
            h = _softplus(z) if model.activation == "softplus" else z
            post.append(h)
        else:
            h = z
    return model.output_scale * h, (pre, post)


def backprop(model: MlpModel, cache, upstream: np.ndarray):
    """Gradients of ``sum(upstream * outputs)`` with respect to each parameter.

    Returns a list laid out like :meth:`MlpModel.params`.
    """
    pre, post = cache
    delta = model.output_scale * np.atleast_2d(upstream)
    grads = [None] * (2 * len(model.weights))
    for k in range(len(model.weights) - 1, -1, -1):
        grads[2 * k] = post[k].T @ delta
        grads[2 * k + 1] = delta.sum(axis=0)
        if k > 0:
            delta = delta @ model.weights[k].T
            if model.activation == "softplus":
                delta = delta * _sigmoid(pre[k - 1])
    return grads


def adam_step(
    model: MlpModel,
    grads: Sequence[np.ndarray],
    lr: float = 1e-3,
    beta1: float = 0.9,
    beta2: float = 0.999,
    eps: float = 1e-8,
    weight_decay: float = 0.0,
) -> MlpModel:
    """One Adam update (with bias correction), applied in place. Returns the model."""
    params = model.params()
    if len(grads) != len(params):
        raise ValueError("gradient list does not match the parameters")
    if model.adam is None:
        model.adam = AdamState([np.zeros_like(p) for p in params], [np.zeros_like(p) for p in params])
    st = model.adam
    st.step += 1
    bc1 = 1.0 - beta1**st.step
    bc2 = 1.0 - beta2**st.step
    for p, g, m, v in zip(params, grads, st.m, st.v):
        if weight_decay:
            g = g + weight_decay * p
        m *= beta1
        m += (1.0 - beta1) * g
        v *= beta2
        v += (1.0 - beta2) * g * g
        p -= lr * (m / bc1) / (np.sqrt(v / bc2) + eps)
    return model


def to_dict(model: MlpModel, include_optimizer: bool = True) -> dict:
    out = {
        "version": MODEL_VERSION,
        "layer_sizes": list(model.layer_sizes),
        "activation": model.activation,
        "norm_mean": np.asarray(model.norm_mean).tolist(),
        "norm_scale": np.asarray(model.norm_scale).tolist(),
        "output_scale": float(model.output_scale),
        "weights": [W.tolist() for W in model.weights],
        "biases": [b.tolist() for b in model.biases],
    }
    if include_optimizer and model.adam is not None:
        out["adam_state"] = {
            "step": model.adam.step,
            "m": [m.tolist() for m in model.adam.m],
            "v": [v.tolist() for v in model.adam.v],
        }
    return out


def from_dict(d: dict) -> MlpModel:
    if not isinstance(d, dict) or "version" not in d:
        raise ModelFormatError("not a model file (missing version)")
    if d["version"] != MODEL_VERSION:
        raise ModelFormatError(f"unsupported model version {d['version']!r} (expected {MODEL_VERSION})")
    try:
        sizes = [int(s) for s in d["layer_sizes"]]
        weights = [np.asarray(W, dtype=float).reshape(a, b) for W, a, b in zip(d["weights"], sizes[:-1], sizes[1:])]
        biases = [np.asarray(b, dtype=float).reshape(n) for b, n in zip(d["biases"], sizes[1:])]
        if len(weights) != len(sizes) - 1 or len(biases) != len(sizes) - 1:
            raise ModelFormatError("layer count does not match layer_sizes")
        model = MlpModel(
            sizes,
            weights,
            biases,
            activation=d["activation"],
            norm_mean=np.asarray(d["norm_mean"], dtype=float),
            norm_scale=np.asarray(d["norm_scale"], dtype=float),
            output_scale=float(d.get("output_scale", 1.0)),
        )
        if "adam_state" in d:
            a = d["adam_state"]
            shapes = [p.shape for p in model.params()]
            model.adam = AdamState(
                [np.asarray(m, dtype=float).reshape(s) for m, s in zip(a["m"], shapes)],
                [np.asarray(v, dtype=float).reshape(s) for v, s in zip(a["v"], shapes)],
                int(a["step"]),
            )
    except (KeyError, TypeError, ValueError) as exc:
        if isinstance(exc, ModelFormatError):
            raise
        raise ModelFormatError(f"malformed model file: {exc}") from None
    if not all(np.all(np.isfinite(p)) for p in model.params()):
        raise ModelFormatError("model has non-finite parameters")
    return model


def save(model: MlpModel) -> bytes:
    # json writes floats with repr, which round-trips doubles exactly
    return json.dumps(to_dict(model)).encode()


def load(data: bytes) -> MlpModel:
    try:
        d = json.loads(data)
    except (ValueError, UnicodeDecodeError) as exc:
        raise ModelFormatError(f"model file is not valid JSON: {exc}") from None
    return from_dict(d)
