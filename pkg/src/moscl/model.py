"""Two-layer perceptron with manual backprop, multiplicative perturbation
injection at the hidden feature map, per-sample gradients, and SGD updates.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from . import kernels
from .kernels import (
    ACT_RELU,
    ACT_TANH,
    HEAD_SIGMOID,
    HEAD_SOFTMAX,
    LOSS_CE,
    LOSS_MSE,
)

ACTIVATIONS = {"tanh": ACT_TANH, "relu": ACT_RELU}
HEADS = {"sigmoid": HEAD_SIGMOID, "softmax": HEAD_SOFTMAX}
LOSSES = {"mse": LOSS_MSE, "ce": LOSS_CE}


@dataclass
class ForwardTrace:
    """Record of one forward pass: hidden feature map (post-activation and
    post-perturbation), pre-head latent, and prediction."""

    f: np.ndarray
    z: np.ndarray
    y_hat: np.ndarray

    @property
    def prob(self) -> float:
        """Scalar prediction for sigmoid heads."""
        return float(self.y_hat[0])


class MlpModel:
    """input -> hidden (tanh or relu) -> linear head (sigmoid or softmax).

    Parameters are initialized uniformly in [-1/sqrt(fan_in), +1/sqrt(fan_in)]
    from the given seed.
    """

    def __init__(
        self,
        input_dim: int,
        hidden_dim: int,
        out_dim: int = 1,
        activation: str = "tanh",
        head: str = "sigmoid",
        seed: int = 0,
    ):
        if head == "sigmoid" and out_dim != 1:
            raise ValueError("sigmoid head requires out_dim=1")
        if activation not in ACTIVATIONS:
            raise ValueError(f"unknown activation {activation!r}")
        if head not in HEADS:
            raise ValueError(f"unknown head {head!r}")
        self.activation = activation
        self.head = head
        rng = np.random.default_rng(seed)
        s1 = 1.0 / np.sqrt(input_dim)
        s2 = 1.0 / np.sqrt(hidden_dim)
        self.W1 = rng.uniform(-s1, s1, (hidden_dim, input_dim))
        self.b1 = rng.uniform(-s1, s1, hidden_dim)
        self.W2 = rng.uniform(-s2, s2, (out_dim, hidden_dim))
        self.b2 = rng.uniform(-s2, s2, out_dim)

    # -- basic geometry ----------------------------------------------------

    @property
    def input_dim(self) -> int:
        return self.W1.shape[1]

    @property
    def hidden_dim(self) -> int:
        return self.W1.shape[0]

    @property
    def out_dim(self) -> int:
        return self.W2.shape[0]

    @property
    def n_params(self) -> int:
        return self.W1.size + self.b1.size + self.W2.size + self.b2.size

    @property
    def _act(self) -> int:
        return ACTIVATIONS[self.activation]

    @property
    def _head(self) -> int:
        return HEADS[self.head]

    def copy(self) -> "MlpModel":
        other = MlpModel.__new__(MlpModel)
        other.activation = self.activation
        other.head = self.head
        other.W1 = self.W1.copy()
        other.b1 = self.b1.copy()
        other.W2 = self.W2.copy()
        other.b2 = self.b2.copy()
        return other

    # -- forward -----------------------------------------------------------

    def forward(
        self, x: np.ndarray, perturbation: Optional[np.ndarray] = None
    ) -> ForwardTrace:
        """Single-sample forward pass.  If a perturbation vector ``t`` is
        given, the hidden feature map becomes f * (1 + t) elementwise before
        the head."""
        x = np.asarray(x, dtype=np.float64)
        if x.shape != (self.input_dim,):
            raise ValueError(f"expected input of shape ({self.input_dim},)")
        fpre = self.W1 @ x + self.b1
        f = kernels._activate(fpre, self._act)
        if perturbation is not None:
            t = np.asarray(perturbation, dtype=np.float64)
            if t.shape != (self.hidden_dim,):
                raise ValueError(f"perturbation must have shape ({self.hidden_dim},)")
            f = f * (1.0 + t)
        z = self.W2 @ f + self.b2
        y_hat = kernels._head_np(z[None, :], self._head)[0]
        return ForwardTrace(f=f, z=z, y_hat=y_hat)

    def forward_batch(self, X: np.ndarray):
        """Vectorized unperturbed forward; returns (F, Z, Y_hat) arrays."""
        X = np.asarray(X, dtype=np.float64)
        return kernels.forward_batch(
            self.W1, self.b1, self.W2, self.b2, X, self._act, self._head
        )

    def batch_losses(self, X: np.ndarray, labels: np.ndarray, loss_kind: str = "mse"):
        """Per-sample losses and predictions over a dataset matrix."""
        _, _, Y = self.forward_batch(X)
        labels = np.asarray(labels, dtype=np.int64)
        return kernels.loss_batch(Y, labels, self._head, LOSSES[loss_kind]), Y

    # -- gradients ---------------------------------------------------------

    def per_sample_gradient(
        self, x: np.ndarray, y: int, loss_kind: str = "mse"
    ) -> np.ndarray:
        """Exact backprop gradient of the per-sample loss w.r.t. all
        parameters, flattened as [W1, b1, W2, b2]."""
        x = np.asarray(x, dtype=np.float64)
        fpre = self.W1 @ x + self.b1
        F = kernels._activate(fpre, self._act)
        z = self.W2 @ F + self.b2
        y_hat = kernels._head_np(z[None, :], self._head)[0]
        dz = kernels._dloss_dz_np(
            y_hat[None, :], np.asarray([y], dtype=np.int64), self._head, LOSSES[loss_kind]
        )[0]
        dW2 = np.outer(dz, F)
        db2 = dz
        dF = self.W2.T @ dz
        if self.activation == "tanh":
            dFpre = dF * (1.0 - F * F)
        else:
            dFpre = np.where(fpre > 0.0, dF, 0.0)
        dW1 = np.outer(dFpre, x)
        db1 = dFpre
        return np.concatenate([dW1.ravel(), db1, dW2.ravel(), db2])

    def latent_gradient(self, x: np.ndarray, y: int, loss_kind: str = "mse") -> float:
        """Backpropagated dL/dz for sigmoid heads.  Equals the b2 component
        of the full parameter gradient."""
        if self.head != "sigmoid":
            raise ValueError("latent gradient is defined for the sigmoid head")
        return float(self.per_sample_gradient(x, y, loss_kind)[-1])

    def sgd_step(self, gradients: Sequence[np.ndarray], lr: float) -> None:
        """Update parameters in place with the mean of a batch of flattened
        per-sample gradients."""
        if lr <= 0.0:
            raise ValueError("learning rate must be positive")
        g = np.mean(np.asarray(gradients, dtype=np.float64), axis=0)
        if g.shape != (self.n_params,):
            raise ValueError("gradient dimension mismatch")
        h, d, c = self.hidden_dim, self.input_dim, self.out_dim
        i = 0
        self.W1 -= lr * g[i : i + h * d].reshape(h, d)
        i += h * d
        self.b1 -= lr * g[i : i + h]
        i += h
        self.W2 -= lr * g[i : i + c * h].reshape(c, h)
        i += c * h
        self.b2 -= lr * g[i : i + c]

    # -- checkpointing -----------------------------------------------------

    def to_checkpoint(self) -> dict:
        """JSON-serializable checkpoint: named row-major arrays with shapes."""
        out = {"activation": self.activation, "head": self.head, "params": {}}
        for name in ("W1", "b1", "W2", "b2"):
            arr = getattr(self, name)
            out["params"][name] = {
                "shape": list(arr.shape),
                "data": arr.ravel().tolist(),
            }
        return out

    def save(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(self.to_checkpoint(), fh)

    @classmethod
    def from_checkpoint(cls, doc: dict) -> "MlpModel":
        model = cls.__new__(cls)
        model.activation = doc["activation"]
        model.head = doc["head"]
        for name in ("W1", "b1", "W2", "b2"):
            entry = doc["params"][name]
            arr = np.asarray(entry["data"], dtype=np.float64).reshape(entry["shape"])
            setattr(model, name, arr)
        return model

    @classmethod
    def load(cls, path) -> "MlpModel":
        with open(path) as fh:
            return cls.from_checkpoint(json.load(fh))


def grad_wrt_prediction(y: int, y_hat: float) -> float:
    """MSE loss gradient w.r.t. the prediction: 2 * (y_hat - y)."""
    return 2.0 * (y_hat - y)


def grad_wrt_latent(y: int, y_hat: float, head: str = "sigmoid") -> float:
    """Closed-form dL/dz for the sigmoid+MSE model:
    -2*y_hat*(1-y_hat)^2 when y=1, +2*y_hat^2*(1-y_hat) when y=0."""
    if head != "sigmoid":
        raise ValueError("closed form is sigmoid-specific")
    if y == 1:
        return -2.0 * y_hat * (1.0 - y_hat) ** 2
    if y == 0:
        return 2.0 * y_hat**2 * (1.0 - y_hat)
    raise ValueError(f"label must be 0 or 1, got {y}")
