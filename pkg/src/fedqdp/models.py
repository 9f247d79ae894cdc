"""Dense-parameter classifiers: softmax regression and a one-hidden-layer MLP.

Model parameters are ordered collections of named float64 tensors with
elementwise arithmetic. Gradients are exact analytic gradients of the mean
softmax cross-entropy; the optimizer is plain SGD with an optional hard
L1-norm bound on the gradient.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


class ShapeMismatchError(ValueError):
    """Raised when two parameter sets are not conformable for arithmetic."""


class ParamSet:
    """Ordered, named float64 tensors supporting elementwise arithmetic.

    Arithmetic requires both operands to have identical names, order, and
    shapes. All operations return new ParamSets; stored arrays are treated
    as immutable. Every constructed set is validated to be finite.
    """

    __slots__ = ("_entries",)

    def __init__(self, entries):
        self._entries: dict[str, np.ndarray] = {}
        for name, value in dict(entries).items():
            arr = np.asarray(value, dtype=np.float64)
            if not np.all(np.isfinite(arr)):
                raise ValueError(f"tensor {name!r} contains non-finite values")
            self._entries[str(name)] = arr

    @property
    def names(self) -> tuple[str, ...]:
        return tuple(self._entries)

    def items(self):
        return self._entries.items()

    def __getitem__(self, name: str) -> np.ndarray:
        return self._entries[name]

    def __len__(self) -> int:
        return len(self._entries)

    def __repr__(self) -> str:
        shapes = ", ".join(f"{k}:{v.shape}" for k, v in self._entries.items())
        return f"ParamSet({shapes})"

    @property
    def num_elements(self) -> int:
        return sum(v.size for v in self._entries.values())

    def _require_conformable(self, other: "ParamSet") -> None:
        if self.names != other.names:
            raise ShapeMismatchError(f"tensor names differ: {self.names} vs {other.names}")
        for name in self.names:
            if self._entries[name].shape != other._entries[name].shape:
                raise ShapeMismatchError(
                    f"tensor {name!r} shapes differ: "
                    f"{self._entries[name].shape} vs {other._entries[name].shape}"
                )

    def __add__(self, other: "ParamSet") -> "ParamSet":
        self._require_conformable(other)
        return ParamSet({k: v + other._entries[k] for k, v in self._entries.items()})

    def __sub__(self, other: "ParamSet") -> "ParamSet":
        self._require_conformable(other)
        return ParamSet({k: v - other._entries[k] for k, v in self._entries.items()})

    def scale(self, factor: float) -> "ParamSet":
        f = float(factor)
        return ParamSet({k: v * f for k, v in self._entries.items()})

    def copy(self) -> "ParamSet":
        return ParamSet({k: v.copy() for k, v in self._entries.items()})

    def zeros_like(self) -> "ParamSet":
        return ParamSet({k: np.zeros_like(v) for k, v in self._entries.items()})


@dataclass(frozen=True)
class ModelSpec:
    """Architecture description. kind is 'logistic' or 'mlp'."""

    kind: str
    input_dim: int
    num_classes: int
    hidden_dim: int = 0

    def __post_init__(self):
        if self.kind not in ("logistic", "mlp"):
            raise ValueError(f"unknown model kind {self.kind!r}")
        if self.input_dim < 1:
            raise ValueError(f"input_dim must be >= 1, got {self.input_dim}")
        if self.num_classes < 2:
            raise ValueError(f"num_classes must be >= 2, got {self.num_classes}")
        if self.kind == "mlp" and self.hidden_dim < 1:
            raise ValueError(f"mlp needs hidden_dim >= 1, got {self.hidden_dim}")


def init_params(spec: ModelSpec, rng: np.random.Generator) -> ParamSet:
    """Initial parameters: weights uniform on [-1/sqrt(fan_in), 1/sqrt(fan_in)],
    biases zero. Same generator state gives bit-identical parameters."""

    def weight(rows, cols):
        limit = 1.0 / np.sqrt(cols)
        return rng.uniform(-limit, limit, size=(rows, cols))

    if spec.kind == "logistic":
        return ParamSet(
            {
                "w": weight(spec.num_classes, spec.input_dim),
                "b": np.zeros(spec.num_classes),
            }
        )
    return ParamSet(
        {
            "w1": weight(spec.hidden_dim, spec.input_dim),
            "b1": np.zeros(spec.hidden_dim),
            "w2": weight(spec.num_classes, spec.hidden_dim),
            "b2": np.zeros(spec.num_classes),
        }
    )


def _check_batch(spec: ModelSpec, params: ParamSet, x: np.ndarray, y: np.ndarray):
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y)
    if x.ndim != 2 or x.shape[1] != spec.input_dim:
        raise ValueError(f"features must have shape (n, {spec.input_dim}), got {x.shape}")
    if y.shape != (x.shape[0],):
        raise ValueError(f"labels must have shape ({x.shape[0]},), got {y.shape}")
    if x.shape[0] == 0:
        raise ValueError("batch is empty")
    if not np.issubdtype(y.dtype, np.integer):
        raise ValueError(f"labels must be integers, got dtype {y.dtype}")
    if y.min() < 0 or y.max() >= spec.num_classes:
        raise ValueError(f"labels must lie in [0, {spec.num_classes}), got range "
                         f"[{y.min()}, {y.max()}]")
    expected = ("w", "b") if spec.kind == "logistic" else ("w1", "b1", "w2", "b2")
    if params.names != expected:
        raise ShapeMismatchError(f"params {params.names} do not match {spec.kind} model")
    return x, y


def _logits(spec: ModelSpec, params: ParamSet, x: np.ndarray):
    """Returns (logits, hidden activations or None)."""
    if spec.kind == "logistic":
        return x @ params["w"].T + params["b"], None
    h = np.tanh(x @ params["w1"].T + params["b1"])
    return h @ params["w2"].T + params["b2"], h


def _softmax(logits: np.ndarray) -> np.ndarray:
    shifted = logits - logits.max(axis=1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=1, keepdims=True)


def predict_proba(spec: ModelSpec, params: ParamSet, x: np.ndarray) -> np.ndarray:
    """Class probabilities, one row per sample; rows sum to 1."""
    x = np.asarray(x, dtype=np.float64)
    logits, _ = _logits(spec, params, x)
    return _softmax(logits)


def predict(spec: ModelSpec, params: ParamSet, x: np.ndarray) -> np.ndarray:
    """Predicted class ids; argmax ties resolve to the lowest class id."""
    return np.argmax(predict_proba(spec, params, x), axis=1)


def loss_and_grad(spec: ModelSpec, params: ParamSet, x: np.ndarray, y: np.ndarray):
    """Mean softmax cross-entropy over the batch and its exact gradient.

    Returns (loss, ParamSet of gradients) with the gradient laid out
    exactly like the parameters.
    """
    x, y = _check_batch(spec, params, x, y)
    n = x.shape[0]
    logits, hidden = _logits(spec, params, x)

    shifted = logits - logits.max(axis=1, keepdims=True)
    log_norm = np.log(np.exp(shifted).sum(axis=1))
    loss = float(np.mean(log_norm - shifted[np.arange(n), y]))

    dlogits = _softmax(logits)
    dlogits[np.arange(n), y] -= 1.0
    dlogits /= n

    if spec.kind == "logistic":
        grad = ParamSet({"w": dlogits.T @ x, "b": dlogits.sum(axis=0)})
    else:
        gw2 = dlogits.T @ hidden
        gb2 = dlogits.sum(axis=0)
        dh = (dlogits @ params["w2"]) * (1.0 - hidden * hidden)
        grad = ParamSet({"w1": dh.T @ x, "b1": dh.sum(axis=0), "w2": gw2, "b2": gb2})
    return loss, grad


def l1_norm(params: ParamSet) -> float:
    """Sum of absolute values over every element of every tensor."""
    return float(sum(np.abs(v).sum() for _, v in params.items()))


def clip_gradient_l1(grad: ParamSet, xi: float) -> ParamSet:
    """Hard-bound the gradient's L1 norm at xi.

    Returns grad unchanged when the norm is already within the bound,
    otherwise rescales onto the bound. Rescaling repeats if float rounding
    leaves the norm a few ulp above xi, which makes the operation exactly
    idempotent.
    """
    if not np.isfinite(xi) or xi <= 0:
        raise ValueError(f"clip bound must be positive and finite, got {xi}")
    norm = l1_norm(grad)
    if norm <= xi:
        return grad
    out = grad.scale(xi / norm)
    norm = l1_norm(out)
    while norm > xi:
        out = out.scale(xi / norm)
        norm = l1_norm(out)
    return out


def sgd_step(params: ParamSet, grad: ParamSet, eta: float) -> ParamSet:
    """One gradient descent step: params - eta * grad."""
    if not np.isfinite(eta) or eta <= 0:
        raise ValueError(f"learning rate must be positive and finite, got {eta}")
    params._require_conformable(grad)
    return ParamSet(
        {k: v - eta * grad[k] for k, v in params.items()}
    )
