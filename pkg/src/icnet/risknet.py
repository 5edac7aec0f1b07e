"""Residual risk network ``r(z) = theta . z + g_W(z)``.

``g_W`` is a plain ReLU feed-forward stack with a scalar output. The linear
skip term is kept outside the stack so that shrinking ``theta_j`` together with
the first-layer column ``W1[:, j]`` removes feature ``j`` from the whole model.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .core import Dataset, DomainError, loglik, loglik_derivatives

ACTIVATIONS = ("relu",)


@dataclass(frozen=True)
class NetConfig:
    hidden_widths: tuple = (10,)
    activation: str = "relu"
    init_seed: int = 0
    init_scale: float = 1.0

    def __post_init__(self):
        widths = tuple(int(w) for w in self.hidden_widths)
        if not widths or min(widths) < 1:
            raise ValueError("need at least one hidden layer with positive width")
        if self.activation not in ACTIVATIONS:
            raise ValueError(f"unknown activation {self.activation!r}")
        if not self.init_scale > 0:
            raise ValueError("init_scale must be positive")
        object.__setattr__(self, "hidden_widths", widths)

    def to_dict(self) -> dict:
        return {"hidden_widths": list(self.hidden_widths), "activation": self.activation,
                "init_seed": self.init_seed, "init_scale": self.init_scale}


@dataclass
class ResidualRiskNet:
    """Skip weights ``theta`` plus ``layers = [(W, b), ...]`` with ``W`` of shape
    ``(fan_out, fan_in)``. Column ``j`` of the first weight matrix holds the
    outward weights of feature ``j``."""

    theta: np.ndarray
    layers: list = field(default_factory=list)

    def __post_init__(self):
        self.theta = np.asarray(self.theta, dtype=float).ravel()
        self.layers = [(np.asarray(W, dtype=float), np.asarray(b, dtype=float).ravel())
                       for W, b in self.layers]
        fan_in = self.theta.size
        if not self.layers:
            raise DomainError("network needs at least an output layer")
        for W, b in self.layers:
            if W.ndim != 2 or W.shape[1] != fan_in or b.shape != (W.shape[0],):
                raise DomainError("layer shapes do not chain")
            fan_in = W.shape[0]
        if fan_in != 1:
            raise DomainError("last layer must have a single output")

    @property
    def d(self) -> int:
        return self.theta.size

    @property
    def W1(self) -> np.ndarray:
        return self.layers[0][0]

    @property
    def n_hidden_params(self) -> int:
        return sum(W.size + b.size for W, b in self.layers)

    @classmethod
    def init(cls, d: int, cfg: NetConfig | None = None) -> "ResidualRiskNet":
        cfg = cfg or NetConfig()
        rng = np.random.default_rng(cfg.init_seed)
        sizes = [d, *cfg.hidden_widths, 1]
        layers = []
        for fan_in, fan_out in zip(sizes[:-1], sizes[1:]):
            s = cfg.init_scale / np.sqrt(fan_in)
            layers.append((rng.uniform(-s, s, size=(fan_out, fan_in)),
                           rng.uniform(-s, s, size=fan_out)))
        return cls(np.zeros(d), layers)

    def copy(self) -> "ResidualRiskNet":
        return ResidualRiskNet(self.theta.copy(), [(W.copy(), b.copy()) for W, b in self.layers])

    def with_first_layer(self, theta, W1) -> "ResidualRiskNet":
        layers = [(np.array(W1, dtype=float), self.layers[0][1].copy())]
        layers += [(W.copy(), b.copy()) for W, b in self.layers[1:]]
        return ResidualRiskNet(np.array(theta, dtype=float), layers)

    def to_dict(self) -> dict:
        return {"theta": self.theta.tolist(),
                "layers": [{"W": W.tolist(), "b": b.tolist()} for W, b in self.layers]}

    @classmethod
    def from_dict(cls, d: dict) -> "ResidualRiskNet":
        return cls(d["theta"], [(layer["W"], layer["b"]) for layer in d["layers"]])


@dataclass
class Gradients:
    theta: np.ndarray
    layers: list

    def flat(self) -> np.ndarray:
        parts = [self.theta] + [a.ravel() for W, b in self.layers for a in (W, b)]
        return np.concatenate(parts)


def _check_Z(net, Z):
    Z = np.asarray(Z, dtype=float)
    if Z.ndim == 1:
        Z = Z.reshape(1, -1)
    if Z.shape[1] != net.d:
        raise DomainError(f"covariates have {Z.shape[1]} columns, network expects {net.d}")
    return Z


def _hidden_forward(net, Z):
    """Run the stack, returning pre-activations and activations per layer."""
    acts = [Z]
    pre = []
    a = Z
    for W, b in net.layers[:-1]:
        h = a @ W.T + b
        pre.append(h)
        a = np.maximum(h, 0.0)
        acts.append(a)
    W, b = net.layers[-1]
    out = (a @ W.T + b)[:, 0]
    return out, pre, acts


def hidden_output(net: ResidualRiskNet, Z) -> np.ndarray:
    """``g_W(Z)``: the feed-forward stack without the skip term."""
    return _hidden_forward(net, _check_Z(net, Z))[0]


def forward(net: ResidualRiskNet, Z) -> np.ndarray:
    Z = _check_Z(net, Z)
    return Z @ net.theta + _hidden_forward(net, Z)[0]


def backward(net: ResidualRiskNet, Z, dout, cache=None) -> Gradients:
    """Pull back ``dout = dL/dr`` (length n) to parameter gradients.

    ``cache`` is the ``(pre, acts)`` pair from a forward pass on the same ``Z``.
    """
    Z = _check_Z(net, Z)
    dout = np.asarray(dout, dtype=float)
    if cache is None:
        _, pre, acts = _hidden_forward(net, Z)
    else:
        pre, acts = cache
    grads = [None] * len(net.layers)
    delta = dout[:, None]
    for k in range(len(net.layers) - 1, -1, -1):
        W, _ = net.layers[k]
        grads[k] = (delta.T @ acts[k], delta.sum(axis=0))
        if k:
            delta = (delta @ W) * (pre[k - 1] > 0)
    return Gradients(Z.T @ dout, grads)


def loss_and_grad(net: ResidualRiskNet, data: Dataset, LU, LV, normalize: bool = False):
    """Negative log-likelihood at fixed baseline values and its exact gradient.

    With ``normalize`` the loss and gradients are divided by ``n``.
    Returns ``(loss, grad_theta, grad_layers)``.
    """
    Z = _check_Z(net, data.Z)
    out, pre, acts = _hidden_forward(net, Z)
    risks = Z @ net.theta + out
    loss = -loglik(data, risks, LU, LV)
    dout = -loglik_derivatives(data, risks, LU, LV)["dr"]
    if normalize:
        loss /= data.n
        dout /= data.n
    g = backward(net, Z, dout, cache=(pre, acts))
    return loss, g.theta, g.layers


def gradient_step(net: ResidualRiskNet, grad_theta, grad_layers, alpha: float) -> ResidualRiskNet:
    if not alpha > 0:
        raise ValueError("learning rate must be positive")
    theta = net.theta - alpha * np.asarray(grad_theta)
    layers = [(W - alpha * dW, b - alpha * db)
              for (W, b), (dW, db) in zip(net.layers, grad_layers)]
    return ResidualRiskNet(theta, layers)
