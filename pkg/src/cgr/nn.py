"""Dense-network numerical core: forward, backprop, Adamax, losses.

Everything operates on float64 numpy arrays. Inputs may be single vectors
(1-D) or batches (2-D, one row per sample); outputs match.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field

import numpy as np

SIGMA_FLOOR = 1e-3

_ACTIVATIONS = ("relu", "tanh", "identity", "softplus")


def _act(z, tag):
    if tag == "relu":
        return np.maximum(z, 0.0)
    if tag == "tanh":
        return np.tanh(z)
    if tag == "identity":
        return z
    if tag == "softplus":
        return np.logaddexp(0.0, z)
    raise ValueError(f"unknown activation {tag!r}")


def _act_grad(z, a, tag):
    # derivative of the activation at z (a = act(z) reused where cheaper)
    if tag == "relu":
        return (z > 0.0).astype(np.float64)
    if tag == "tanh":
        return 1.0 - a * a
    if tag == "identity":
        return np.ones_like(z)
    if tag == "softplus":
        return 1.0 / (1.0 + np.exp(-z))
    raise ValueError(f"unknown activation {tag!r}")


@dataclass
class Layer:
    W: np.ndarray  # (fan_in, fan_out)
    b: np.ndarray  # (fan_out,)
    activation: str

    def __post_init__(self):
        if self.activation not in _ACTIVATIONS:
            raise ValueError(f"unknown activation {self.activation!r}")
        if self.W.ndim != 2 or self.b.shape != (self.W.shape[1],):
            raise ValueError("layer weight/bias shape mismatch")


@dataclass
class NetworkParams:
    layers: list[Layer]
    # Adamax state: exponential first moment and infinity-norm second moment,
    # one pair per (W, b)
    m: list[tuple[np.ndarray, np.ndarray]] = field(default_factory=list)
    u: list[tuple[np.ndarray, np.ndarray]] = field(default_factory=list)
    step: int = 0

    def __post_init__(self):
        for a, b in zip(self.layers, self.layers[1:]):
            if a.W.shape[1] != b.W.shape[0]:
                raise ValueError("adjacent layer widths do not match")
        if not self.m:
            self.m = [(np.zeros_like(l.W), np.zeros_like(l.b)) for l in self.layers]
        if not self.u:
            self.u = [(np.zeros_like(l.W), np.zeros_like(l.b)) for l in self.layers]

    @property
    def in_dim(self):
        return self.layers[0].W.shape[0]

    @property
    def out_dim(self):
        return self.layers[-1].W.shape[1]

    def copy(self) -> "NetworkParams":
        return NetworkParams(
            layers=[Layer(l.W.copy(), l.b.copy(), l.activation) for l in self.layers],
            m=[(mw.copy(), mb.copy()) for mw, mb in self.m],
            u=[(uw.copy(), ub.copy()) for uw, ub in self.u],
            step=self.step,
        )

    def copy_weights_from(self, other: "NetworkParams"):
        for dst, src in zip(self.layers, other.layers):
            np.copyto(dst.W, src.W)
            np.copyto(dst.b, src.b)


def init_network(sizes, activations, rng) -> NetworkParams:
    """Uniform init in +-1/sqrt(fan_in); sizes = (in, h1, ..., out)."""
    if len(activations) != len(sizes) - 1:
        raise ValueError("need one activation per weight layer")
    layers = []
    for fan_in, fan_out, act in zip(sizes, sizes[1:], activations):
        bound = 1.0 / np.sqrt(fan_in)
        W = rng.uniform(-bound, bound, size=(fan_in, fan_out))
        b = rng.uniform(-bound, bound, size=fan_out)
        layers.append(Layer(W, b, act))
    return NetworkParams(layers)


def forward(params: NetworkParams, x):
    """Plain forward pass; returns last-layer activation."""
    out, _ = forward_cached(params, x)
    return out


def forward_cached(params: NetworkParams, x):
    """Forward pass keeping pre/post-activation values for backprop."""
    x = np.asarray(x, dtype=np.float64)
    squeeze = x.ndim == 1
    a = x.reshape(1, -1) if squeeze else x
    if a.shape[1] != params.in_dim:
        raise ValueError(
            f"input width {a.shape[1]} does not match network input {params.in_dim}"
        )
    pre, post = [], [a]
    for layer in params.layers:
        z = a @ layer.W + layer.b
        a = _act(z, layer.activation)
        pre.append(z)
        post.append(a)
    out = post[-1][0] if squeeze else post[-1]
    return out, (pre, post, squeeze)


def backward(params: NetworkParams, cache, upstream):
    """Gradients of a scalar loss w.r.t. every parameter.

    `upstream` is dLoss/dOutput, same shape as the forward output.
    Returns a list of (dW, db) mirroring params.layers.
    """
    pre, post, squeeze = cache
    g = np.asarray(upstream, dtype=np.float64)
    g = g.reshape(1, -1) if squeeze else g
    if g.shape != post[-1].shape:
        raise ValueError("upstream gradient shape does not match output")
    grads = [None] * len(params.layers)
    for i in range(len(params.layers) - 1, -1, -1):
        layer = params.layers[i]
        dz = g * _act_grad(pre[i], post[i + 1], layer.activation)
        grads[i] = (post[i].T @ dz, dz.sum(axis=0))
        if i > 0:
            g = dz @ layer.W.T
    return grads


def adamax_step(params: NetworkParams, grads, lr, beta1=0.9, beta2=0.999, eps=1e-8):
    """One Adamax update in place; returns params for convenience."""
    params.step += 1
    correction = 1.0 - beta1**params.step
    for layer, (dW, db), (mW, mb), (uW, ub) in zip(params.layers, grads, params.m, params.u):
        for p, g, m, u in ((layer.W, dW, mW, uW), (layer.b, db, mb, ub)):
            m *= beta1
            m += (1.0 - beta1) * g
            np.maximum(beta2 * u, np.abs(g), out=u)
            p -= (lr / correction) * m / (u + eps)
            if not np.all(np.isfinite(p)):
                raise FloatingPointError("non-finite parameter after Adamax update")
    return params


def mse_loss(prediction, target):
    """Mean squared error and its gradient w.r.t. prediction."""
    p = np.asarray(prediction, dtype=np.float64)
    t = np.asarray(target, dtype=np.float64)
    if p.shape != t.shape:
        raise ValueError("prediction/target length mismatch")
    diff = p - t
    loss = float(np.mean(diff * diff))
    return loss, 2.0 * diff / diff.size


@dataclass
class GaussianHead:
    mean: np.ndarray
    std: np.ndarray

    def __post_init__(self):
        self.mean = np.atleast_1d(np.asarray(self.mean, dtype=np.float64))
        self.std = np.atleast_1d(np.asarray(self.std, dtype=np.float64))
        if self.mean.shape != self.std.shape:
            raise ValueError("mean/std shape mismatch")
        if np.any(self.std < SIGMA_FLOOR):
            raise ValueError(f"std below floor {SIGMA_FLOOR}")


def gaussian_nll_loss(head: GaussianHead, target):
    """Summed Gaussian negative log likelihood and exact gradients.

    loss = sum_d 0.5*ln(2*pi*sigma_d^2) + (t_d - mu_d)^2 / (2*sigma_d^2)
    """
    t = np.atleast_1d(np.asarray(target, dtype=np.float64))
    if t.shape != head.mean.shape:
        raise ValueError("target shape mismatch")
    var = head.std**2
    diff = head.mean - t
    loss = float(np.sum(0.5 * np.log(2.0 * np.pi * var) + diff**2 / (2.0 * var)))
    dmean = diff / var
    dstd = 1.0 / head.std - diff**2 / head.std**3
    return loss, dmean, dstd


def softmax(values):
    v = np.asarray(values, dtype=np.float64)
    if not np.all(np.isfinite(v)):
        raise ValueError("non-finite softmax input")
    e = np.exp(v - v.max(axis=-1, keepdims=True))
    return e / e.sum(axis=-1, keepdims=True)


def save_params(params: NetworkParams, path):
    """Flat binary snapshot: uint32 header (layer count, per-layer in/out dims),
    then all weights and biases as little-endian float64."""
    with open(path, "wb") as f:
        f.write(struct.pack("<I", len(params.layers)))
        for layer in params.layers:
            f.write(struct.pack("<II", *layer.W.shape))
        for layer in params.layers:
            f.write(layer.W.astype("<f8").tobytes())
            f.write(layer.b.astype("<f8").tobytes())


def load_params(path, activations) -> NetworkParams:
    """Load a snapshot written by save_params; activations are not stored in
    the file and must be supplied."""
    with open(path, "rb") as f:
        (n_layers,) = struct.unpack("<I", f.read(4))
        if len(activations) != n_layers:
            raise ValueError("activation count does not match snapshot")
        shapes = [struct.unpack("<II", f.read(8)) for _ in range(n_layers)]
        layers = []
        for (fan_in, fan_out), act in zip(shapes, activations):
            W = np.frombuffer(f.read(8 * fan_in * fan_out), dtype="<f8").reshape(
                fan_in, fan_out
            )
            b = np.frombuffer(f.read(8 * fan_out), dtype="<f8")
            layers.append(Layer(W.copy(), b.copy(), act))
    return NetworkParams(layers)


class GaussianNet:
    """A dense net whose raw output parameterizes a diagonal Gaussian.

    The underlying network emits 2*d identity outputs; the first d are the
    mean, the last d pass through softplus plus SIGMA_FLOOR so the std is
    always positive.
    """

    def __init__(self, params: NetworkParams):
        if params.out_dim % 2 != 0:
            raise ValueError("Gaussian net needs an even output width")
        self.params = params
        self.dim = params.out_dim // 2

    def head(self, x):
        h, _ = self.head_cached(x)
        return h

    def head_cached(self, x):
        """Single-vector head: returns (GaussianHead, ctx)."""
        raw, cache = forward_cached(self.params, np.asarray(x, dtype=np.float64))
        if raw.ndim != 1:
            raise ValueError("head_cached takes a single input vector")
        d = self.dim
        pre_std = raw[d:]
        std = np.logaddexp(0.0, pre_std) + SIGMA_FLOOR
        return GaussianHead(raw[:d], std), (cache, pre_std)

    def forward_batch(self, x):
        """Batched head: returns (mean, std) arrays of shape (batch, d)."""
        raw, cache = forward_cached(self.params, np.atleast_2d(x))
        d = self.dim
        mean = raw[:, :d]
        pre_std = raw[:, d:]
        std = np.logaddexp(0.0, pre_std) + SIGMA_FLOOR
        return mean, std, (cache, pre_std)

    def backward(self, ctx, dmean, dstd):
        """Map gradients w.r.t. (mean, std) back to parameter gradients."""
        cache, pre_std = ctx
        dpre_std = np.asarray(dstd) / (1.0 + np.exp(-pre_std))
        upstream = np.concatenate(
            [np.atleast_2d(dmean), np.atleast_2d(dpre_std)], axis=-1
        )
        if not cache[2]:  # batched forward
            return backward(self.params, cache, upstream)
        return backward(self.params, cache, upstream[0])
