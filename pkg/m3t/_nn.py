# -*- coding: utf-8 -*-
# Copyright (C) 2025 by the m3t developers
# All rights reserved. BSD 3-clause License.
# This file is part of the m3t package. Details of the copyright
# and user license can be found in the 'LICENSE' file distributed
# with the package.

"""Dense network layers with exact reverse-mode gradients.

Every layer is a :class:`Module` with a :meth:`~Module.forward` method
that caches what it needs and a :meth:`~Module.backward` method that
accumulates parameter gradients and returns the gradient with respect
to its input. All arrays are 64-bit floats; a leading batch axis is
supported throughout.
"""

import logging
import os
from collections import OrderedDict
from dataclasses import dataclass
from typing import Callable, Dict, Iterator, List, Optional, Sequence, Tuple

import numpy as np

from ._errors import CheckpointMissing, NonFinite, ShapeMismatch

logger = logging.getLogger(__name__)

#: Checkpoint file format version.
CHECKPOINT_VERSION = 1


def check_finite(a: np.ndarray, what: str) -> np.ndarray:
    """Raise :class:`NonFinite` if `a` contains NaN or infinite values."""
    if not np.all(np.isfinite(a)):
        raise NonFinite(f"Non-finite values in {what}.")
    return a


def sigmoid(x: np.ndarray) -> np.ndarray:
    # split by sign to avoid overflow in exp
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def softmax(x: np.ndarray, axis: int = -1) -> np.ndarray:
    e = np.exp(x - x.max(axis=axis, keepdims=True))
    return e / e.sum(axis=axis, keepdims=True)


class Module:
    """Base class of layers and networks.

    Parameters and their gradients are held in dicts keyed by name;
    submodules are registered with :meth:`add_module` so that
    :meth:`named_parameters` yields dotted names for the whole tree.
    """

    def __init__(self):
        self.params: Dict[str, np.ndarray] = OrderedDict()
        self.grads: Dict[str, np.ndarray] = OrderedDict()
        self.modules: Dict[str, "Module"] = OrderedDict()

    def add_param(self, name: str, value: np.ndarray) -> np.ndarray:
        value = np.array(value, dtype=np.float64)
        self.params[name] = value
        self.grads[name] = np.zeros_like(value)
        return value

    def add_module(self, name: str, module: "Module") -> "Module":
        self.modules[name] = module
        return module

    def named_parameters(
        self, prefix: str = ""
    ) -> Iterator[Tuple[str, np.ndarray, np.ndarray]]:
        """Yield (name, parameter, gradient) for this module and its submodules."""
        for name, value in self.params.items():
            yield prefix + name, value, self.grads[name]
        for name, module in self.modules.items():
            yield from module.named_parameters(prefix + name + ".")

    def zero_grad(self):
        for _, _, grad in self.named_parameters():
            grad.fill(0.0)

    def state_dict(self) -> Dict[str, np.ndarray]:
        return OrderedDict((k, v.copy()) for k, v, _ in self.named_parameters())

    def load_state_dict(self, state: Dict[str, np.ndarray]):
        """Copy parameter values in place.

        Raises:
            ShapeMismatch: If a name is missing or a shape differs.
        """
        for name, value, _ in self.named_parameters():
            if name not in state:
                raise ShapeMismatch(f"Parameter {name} missing from state.")
            if state[name].shape != value.shape:
                raise ShapeMismatch(
                    f"Parameter {name} has shape {value.shape}, "
                    f"state has {state[name].shape}."
                )
            value[...] = state[name]

    def copy_from(self, other: "Module"):
        """Set parameters to those of a module with the same structure."""
        self.load_state_dict(other.state_dict())

    def num_parameters(self) -> int:
        return sum(v.size for _, v, _ in self.named_parameters())

    def forward(self, x: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def backward(self, grad: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def __call__(self, x: np.ndarray) -> np.ndarray:
        return self.forward(x)


def _uniform(rng: np.random.Generator, fan_in: int, shape) -> np.ndarray:
    bound = 1.0 / np.sqrt(fan_in)
    return rng.uniform(-bound, bound, size=shape)


ACTIVATIONS = (None, "relu", "tanh")


class Dense(Module):
    """Fully connected layer :math:`y = \\phi(x W + b)`.

    Args:
        in_features: Input width.
        out_features: Output width.
        activation: ``None``, ``"relu"`` or ``"tanh"``.
        rng: Random generator for uniform fan-in initialization.
    """

    def __init__(
        self,
        in_features: int,
        out_features: int,
        activation: Optional[str] = None,
        rng: Optional[np.random.Generator] = None,
    ):
        super().__init__()
        if activation not in ACTIVATIONS:
            raise ValueError(f"Unknown activation {activation!r}.")
        rng = np.random.default_rng(0) if rng is None else rng
        self.in_features = in_features
        self.out_features = out_features
        self.activation = activation
        self.add_param("weight", _uniform(rng, in_features, (in_features, out_features)))
        self.add_param("bias", _uniform(rng, in_features, (out_features,)))
        self._x: Optional[np.ndarray] = None
        self._y: Optional[np.ndarray] = None

    def forward(self, x: np.ndarray) -> np.ndarray:
        if x.shape[-1] != self.in_features:
            raise ShapeMismatch(
                f"Dense layer expects width {self.in_features}, got {x.shape[-1]}."
            )
        self._x = x
        y = x @ self.params["weight"] + self.params["bias"]
        if self.activation == "relu":
            y = np.maximum(y, 0.0)
        elif self.activation == "tanh":
            y = np.tanh(y)
        self._y = check_finite(y, "dense layer output")
        return y

    def backward(self, grad: np.ndarray) -> np.ndarray:
        if grad.shape != self._y.shape:
            raise ShapeMismatch(f"Gradient shape {grad.shape} != {self._y.shape}.")
        if self.activation == "relu":
            grad = grad * (self._y > 0.0)
        elif self.activation == "tanh":
            grad = grad * (1.0 - self._y**2)
        x2 = self._x.reshape(-1, self.in_features)
        g2 = grad.reshape(-1, self.out_features)
        self.grads["weight"] += x2.T @ g2
        self.grads["bias"] += g2.sum(axis=0)
        return grad @ self.params["weight"].T


def fc_forward(x: np.ndarray, layer: Dense) -> np.ndarray:
    """Functional form of :meth:`Dense.forward`."""
    return layer.forward(x)


def fc_backward(grad_out: np.ndarray, layer: Dense) -> np.ndarray:
    """Functional form of :meth:`Dense.backward`."""
    return layer.backward(grad_out)


class Sequential(Module):
    """Chain of modules applied in order."""

    def __init__(self, *layers: Module):
        super().__init__()
        self.layers = list(layers)
        for k, layer in enumerate(self.layers):
            self.add_module(str(k), layer)

    def forward(self, x: np.ndarray) -> np.ndarray:
        for layer in self.layers:
            x = layer.forward(x)
        return x

    def backward(self, grad: np.ndarray) -> np.ndarray:
        for layer in reversed(self.layers):
            grad = layer.backward(grad)
        return grad


def mlp(
    widths: Sequence[int],
    rng: np.random.Generator,
    activation: str = "relu",
    final_activation: Optional[str] = None,
) -> Sequential:
    """Multilayer perceptron with the given layer widths (input first)."""
    layers = []
    for k in range(len(widths) - 1):
        last = k == len(widths) - 2
        act = final_activation if last else activation
        layers.append(Dense(widths[k], widths[k + 1], act, rng))
    return Sequential(*layers)


def lstm_cell_update(
    i: np.ndarray, f: np.ndarray, g: np.ndarray, o: np.ndarray, c_prev: np.ndarray
) -> Tuple[np.ndarray, np.ndarray]:
    """LSTM cell and hidden state update from gate activations.

    Args:
        i: Input gate.
        f: Forget gate.
        g: Candidate cell state.
        o: Output gate.
        c_prev: Previous cell state.

    Returns:
        New cell state and hidden state.
    """
    c = f * c_prev + i * g
    return c, o * np.tanh(c)


class LSTM(Module):
    """Long short-term memory layer over a sequence.

    Gate pre-activations are :math:`x_t W_x + h_{t-1} W_h + b`, split
    into input, forget, candidate and output blocks.

    Args:
        in_features: Width of each sequence element.
        hidden: Hidden state width.
        rng: Random generator.
    """

    def __init__(self, in_features: int, hidden: int, rng: Optional[np.random.Generator] = None):
        super().__init__()
        rng = np.random.default_rng(0) if rng is None else rng
        self.in_features = in_features
        self.hidden = hidden
        self.add_param("w_x", _uniform(rng, hidden, (in_features, 4 * hidden)))
        self.add_param("w_h", _uniform(rng, hidden, (hidden, 4 * hidden)))
        self.add_param("bias", _uniform(rng, hidden, (4 * hidden,)))
        self._cache: List[tuple] = []
        self._x: Optional[np.ndarray] = None

    def forward(
        self,
        x: np.ndarray,
        h0: Optional[np.ndarray] = None,
        c0: Optional[np.ndarray] = None,
    ) -> np.ndarray:
        """Run the recurrence.

        Args:
            x: Input of shape (`B`, `T`, `in_features`).
            h0: Initial hidden state (`B`, `hidden`), zero if ``None``.
            c0: Initial cell state (`B`, `hidden`), zero if ``None``.

        Returns:
            Hidden states of shape (`B`, `T`, `hidden`).
        """
        if x.ndim != 3 or x.shape[-1] != self.in_features:
            raise ShapeMismatch(
                f"LSTM expects (batch, time, {self.in_features}), got {x.shape}."
            )
        b, steps, _ = x.shape
        hd = self.hidden
        h = np.zeros((b, hd)) if h0 is None else h0
        c = np.zeros((b, hd)) if c0 is None else c0
        self._x = x
        self._cache = []
        hs = np.empty((b, steps, hd))
        for t in range(steps):
            z = x[:, t] @ self.params["w_x"] + h @ self.params["w_h"] + self.params["bias"]
            i = sigmoid(z[:, :hd])
            f = sigmoid(z[:, hd : 2 * hd])
            g = np.tanh(z[:, 2 * hd : 3 * hd])
            o = sigmoid(z[:, 3 * hd :])
            c_prev, h_prev = c, h
            c, h = lstm_cell_update(i, f, g, o, c_prev)
            self._cache.append((i, f, g, o, c_prev, h_prev, c))
            hs[:, t] = h
        return check_finite(hs, "LSTM hidden states")

    def backward(self, grad: np.ndarray) -> np.ndarray:
        """Backpropagation through time.

        Args:
            grad: Gradient with respect to all hidden states
               (`B`, `T`, `hidden`).

        Returns:
            Gradient with respect to the input sequence.
        """
        if grad.shape != self._x.shape[:2] + (self.hidden,):
            raise ShapeMismatch(f"Gradient shape {grad.shape} does not match output.")
        b, steps, _ = grad.shape
        w_x, w_h = self.params["w_x"], self.params["w_h"]
        dx = np.empty_like(self._x)
        dh_next = np.zeros((b, self.hidden))
        dc_next = np.zeros((b, self.hidden))
        for t in reversed(range(steps)):
            i, f, g, o, c_prev, h_prev, c = self._cache[t]
            dh = grad[:, t] + dh_next
            tc = np.tanh(c)
            do = dh * tc
            dc = dh * o * (1.0 - tc**2) + dc_next
            dz = np.concatenate(
                (
                    dc * g * i * (1.0 - i),
                    dc * c_prev * f * (1.0 - f),
                    dc * i * (1.0 - g**2),
                    do * o * (1.0 - o),
                ),
                axis=1,
            )
            self.grads["w_x"] += self._x[:, t].T @ dz
            self.grads["w_h"] += h_prev.T @ dz
            self.grads["bias"] += dz.sum(axis=0)
            dx[:, t] = dz @ w_x.T
            dh_next = dz @ w_h.T
            dc_next = dc * f
        return dx


def lstm_sequence(xs: np.ndarray, layer: LSTM) -> np.ndarray:
    """Functional form of :meth:`LSTM.forward`."""
    return layer.forward(xs)


class LayerNorm(Module):
    """Layer normalization over the last axis.

    Args:
        width: Normalized width.
        eps: Variance regularization.
    """

    def __init__(self, width: int, eps: float = 1e-5):
        super().__init__()
        self.eps = eps
        self.add_param("gain", np.ones(width))
        self.add_param("bias", np.zeros(width))

    def forward(self, x: np.ndarray) -> np.ndarray:
        mu = x.mean(axis=-1, keepdims=True)
        sigma = np.sqrt(x.var(axis=-1, keepdims=True) + self.eps)
        self._xhat = (x - mu) / sigma
        self._sigma = sigma
        return check_finite(self._xhat * self.params["gain"] + self.params["bias"], "layer norm")

    def backward(self, grad: np.ndarray) -> np.ndarray:
        xhat = self._xhat
        width = xhat.shape[-1]
        self.grads["gain"] += (grad * xhat).reshape(-1, width).sum(axis=0)
        self.grads["bias"] += grad.reshape(-1, width).sum(axis=0)
        dxhat = grad * self.params["gain"]
        return (
            dxhat
            - dxhat.mean(axis=-1, keepdims=True)
            - xhat * (dxhat * xhat).mean(axis=-1, keepdims=True)
        ) / self._sigma


class MultiHeadSelfAttention(Module):
    """Multi-headed scaled dot-product self-attention.

    Args:
        width: Model width.
        heads: Number of heads (must divide `width`).
        rng: Random generator.
    """

    def __init__(self, width: int, heads: int, rng: Optional[np.random.Generator] = None):
        super().__init__()
        if width % heads:
            raise ShapeMismatch(f"Width {width} not divisible by {heads} heads.")
        rng = np.random.default_rng(0) if rng is None else rng
        self.width = width
        self.heads = heads
        self.head_width = width // heads
        self.query = self.add_module("query", Dense(width, width, rng=rng))
        self.key = self.add_module("key", Dense(width, width, rng=rng))
        self.value = self.add_module("value", Dense(width, width, rng=rng))
        self.out = self.add_module("out", Dense(width, width, rng=rng))
        self.attention: Optional[np.ndarray] = None

    def _split(self, x: np.ndarray) -> np.ndarray:
        b, n, _ = x.shape
        return x.reshape(b, n, self.heads, self.head_width).transpose(0, 2, 1, 3)

    def _merge(self, x: np.ndarray) -> np.ndarray:
        b, _, n, _ = x.shape
        return x.transpose(0, 2, 1, 3).reshape(b, n, self.width)

    def forward(self, x: np.ndarray) -> np.ndarray:
        """Attend over rows of `x` with shape (`B`, `L`, `width`)."""
        if x.ndim != 3 or x.shape[-1] != self.width:
            raise ShapeMismatch(f"Attention expects (batch, rows, {self.width}), got {x.shape}.")
        q = self._split(self.query(x))
        k = self._split(self.key(x))
        v = self._split(self.value(x))
        scale = 1.0 / np.sqrt(self.head_width)
        a = softmax((q @ k.transpose(0, 1, 3, 2)) * scale)
        self._qkv = (q, k, v)
        self.attention = a
        return self.out(self._merge(a @ v))

    def backward(self, grad: np.ndarray) -> np.ndarray:
        q, k, v = self._qkv
        a = self.attention
        scale = 1.0 / np.sqrt(self.head_width)
        do = self._split(self.out.backward(grad))
        da = do @ v.transpose(0, 1, 3, 2)
        dv = a.transpose(0, 1, 3, 2) @ do
        ds = a * (da - (da * a).sum(axis=-1, keepdims=True)) * scale
        dq = ds @ k
        dk = ds.transpose(0, 1, 3, 2) @ q
        return (
            self.query.backward(self._merge(dq))
            + self.key.backward(self._merge(dk))
            + self.value.backward(self._merge(dv))
        )


class EncoderBlock(Module):
    """Self-attention and position-wise feed-forward with residual
    connections and post-layer normalization."""

    def __init__(self, width: int, heads: int, ff_width: int, rng: np.random.Generator):
        super().__init__()
        self.attn = self.add_module("attn", MultiHeadSelfAttention(width, heads, rng))
        self.norm1 = self.add_module("norm1", LayerNorm(width))
        self.ff = self.add_module(
            "ff", Sequential(Dense(width, ff_width, "relu", rng), Dense(ff_width, width, rng=rng))
        )
        self.norm2 = self.add_module("norm2", LayerNorm(width))

    def forward(self, x: np.ndarray) -> np.ndarray:
        h = self.norm1(x + self.attn(x))
        return self.norm2(h + self.ff(h))

    def backward(self, grad: np.ndarray) -> np.ndarray:
        g = self.norm2.backward(grad)
        g = g + self.ff.backward(g)
        g = self.norm1.backward(g)
        return g + self.attn.backward(g)


def positional_encoding(rows: int, width: int) -> np.ndarray:
    """Fixed sinusoidal positional encoding of shape (`rows`, `width`)."""
    pos = np.arange(rows)[:, None]
    i = np.arange(width)[None, :]
    angle = pos / np.power(10000.0, (2 * (i // 2)) / width)
    return np.where(i % 2 == 0, np.sin(angle), np.cos(angle))


@dataclass(frozen=True)
class MhsaEncoderConfig:
    """Self-attention encoder shape.

    Args:
        layers: Number of encoder blocks.
        heads: Attention heads per block.
        width: Model width.
        ff_width: Feed-forward width.
        positional: Add sinusoidal positional encoding.
    """

    layers: int = 3
    heads: int = 4
    width: int = 32
    ff_width: int = 64
    positional: bool = True

    def __post_init__(self):
        if self.width % self.heads:
            raise ShapeMismatch(f"Width {self.width} not divisible by {self.heads} heads.")


class MhsaEncoder(Module):
    """Stack of self-attention encoder blocks over a window of rows.

    Args:
        in_features: Row width of the input window.
        config: Encoder shape.
        rng: Random generator.
    """

    def __init__(
        self,
        in_features: int,
        config: MhsaEncoderConfig = MhsaEncoderConfig(),
        rng: Optional[np.random.Generator] = None,
    ):
        super().__init__()
        rng = np.random.default_rng(0) if rng is None else rng
        self.config = config
        self.embed = self.add_module("embed", Dense(in_features, config.width, rng=rng))
        self.blocks = [
            self.add_module(f"block{k}", EncoderBlock(config.width, config.heads, config.ff_width, rng))
            for k in range(config.layers)
        ]

    def forward(self, x: np.ndarray) -> np.ndarray:
        """Encode `x` of shape (`B`, `L`, `in_features`) to (`B`, `L`, `width`)."""
        h = self.embed(x)
        if self.config.positional:
            h = h + positional_encoding(x.shape[1], self.config.width)
        for block in self.blocks:
            h = block(h)
        return h

    def backward(self, grad: np.ndarray) -> np.ndarray:
        for block in reversed(self.blocks):
            grad = block.backward(grad)
        return self.embed.backward(grad)

    @property
    def attention(self) -> List[np.ndarray]:
        """Attention weights of the last forward pass, one array per block."""
        return [block.attn.attention for block in self.blocks]


def mhsa_encode(window: np.ndarray, encoder: MhsaEncoder) -> np.ndarray:
    """Functional form of :meth:`MhsaEncoder.forward` for a single window.

    Args:
        window: Window of shape (`L`, `F`) or (`B`, `L`, `F`).
        encoder: Encoder.
    """
    if window.ndim == 2:
        return encoder.forward(window[None])[0]
    return encoder.forward(window)


class TemporalConv(Module):
    """One-dimensional convolution over rows with a rectifier.

    Implemented as a dense kernel applied to unfolded windows of
    `kernel` consecutive rows.

    Args:
        in_features: Row width.
        out_features: Output channels.
        kernel: Kernel length in rows.
        rng: Random generator.
    """

    def __init__(self, in_features: int, out_features: int, kernel: int = 3, rng=None):
        super().__init__()
        self.kernel = kernel
        self.dense = self.add_module(
            "dense", Dense(kernel * in_features, out_features, "relu", rng)
        )

    def forward(self, x: np.ndarray) -> np.ndarray:
        b, n, f = x.shape
        if n < self.kernel:
            raise ShapeMismatch(f"Sequence of {n} rows shorter than kernel {self.kernel}.")
        idx = np.arange(n - self.kernel + 1)[:, None] + np.arange(self.kernel)[None, :]
        self._shape = x.shape
        self._idx = idx
        return self.dense(x[:, idx].reshape(b, idx.shape[0], self.kernel * f))

    def backward(self, grad: np.ndarray) -> np.ndarray:
        b, n, f = self._shape
        du = self.dense.backward(grad).reshape(b, self._idx.shape[0], self.kernel, f)
        dx = np.zeros(self._shape)
        for j in range(self.kernel):
            dx[:, self._idx[:, j]] += du[:, :, j]
        return dx


class MeanPool(Module):
    """Mean over the row axis: (`B`, `L`, `W`) to (`B`, `W`)."""

    def forward(self, x: np.ndarray) -> np.ndarray:
        self._rows = x.shape[1]
        return x.mean(axis=1)

    def backward(self, grad: np.ndarray) -> np.ndarray:
        return np.repeat(grad[:, None, :], self._rows, axis=1) / self._rows


class Flatten(Module):
    """Flatten all but the batch axis."""

    def forward(self, x: np.ndarray) -> np.ndarray:
        self._shape = x.shape
        return x.reshape(x.shape[0], -1)

    def backward(self, grad: np.ndarray) -> np.ndarray:
        return grad.reshape(self._shape)


class LastStep(Module):
    """Select the last row: (`B`, `L`, `W`) to (`B`, `W`)."""

    def forward(self, x: np.ndarray) -> np.ndarray:
        self._shape = x.shape
        return x[:, -1]

    def backward(self, grad: np.ndarray) -> np.ndarray:
        dx = np.zeros(self._shape)
        dx[:, -1] = grad
        return dx


def mse_loss(pred: np.ndarray, target: np.ndarray) -> Tuple[float, np.ndarray]:
    """Mean square error and its gradient with respect to `pred`."""
    if pred.shape != target.shape:
        raise ShapeMismatch(f"Prediction shape {pred.shape} != target {target.shape}.")
    diff = pred - target
    loss = float(np.mean(diff**2))
    if not np.isfinite(loss):
        raise NonFinite("Non-finite loss.")
    return loss, 2.0 * diff / diff.size


class Adam:
    """Adaptive-moment gradient descent.

    Args:
        module: Module whose parameters are updated.
        lr: Learning rate.
        betas: Moment decay rates.
        eps: Denominator regularization.
    """

    def __init__(
        self,
        module: Module,
        lr: float = 1e-3,
        betas: Tuple[float, float] = (0.9, 0.999),
        eps: float = 1e-8,
    ):
        self.module = module
        self.lr = lr
        self.betas = betas
        self.eps = eps
        self.t = 0
        self.m = {n: np.zeros_like(p) for n, p, _ in module.named_parameters()}
        self.v = {n: np.zeros_like(p) for n, p, _ in module.named_parameters()}

    def step(self):
        """Apply one update from the accumulated gradients.

        Raises:
            NonFinite: If a gradient is not finite.
        """
        b1, b2 = self.betas
        self.t += 1
        c1 = 1.0 - b1**self.t
        c2 = 1.0 - b2**self.t
        for name, param, grad in self.module.named_parameters():
            check_finite(grad, f"gradient of {name}")
            m = self.m[name]
            v = self.v[name]
            m *= b1
            m += (1.0 - b1) * grad
            v *= b2
            v += (1.0 - b2) * grad**2
            param -= self.lr * (m / c1) / (np.sqrt(v / c2) + self.eps)


def adam_step(optimizer: Adam):
    """Functional form of :meth:`Adam.step`."""
    optimizer.step()


def save_checkpoint(path: str, modules: Dict[str, Module], **arrays: np.ndarray):
    """Save named module parameters to a ``.npz`` checkpoint.

    Args:
        path: Checkpoint file.
        modules: Modules keyed by name; parameter ``p`` of module ``m`` is
           stored as ``m/p``.
        **arrays: Additional named arrays.
    """
    blob = {"__version__": np.array([CHECKPOINT_VERSION])}
    for mname, module in modules.items():
        for pname, value in module.state_dict().items():
            blob[f"{mname}/{pname}"] = value
    blob.update(arrays)
    directory = os.path.dirname(path)
    if directory:
        os.makedirs(directory, exist_ok=True)
    with open(path, "wb") as f:
        np.savez(f, **blob)
    logger.info("Wrote checkpoint %s", path)


def load_checkpoint(path: str, modules: Dict[str, Module]) -> Dict[str, np.ndarray]:
    """Load named module parameters saved by :func:`save_checkpoint`.

    Returns:
        Extra arrays stored in the checkpoint.

    Raises:
        CheckpointMissing: If the file does not exist or has an unknown
           format version.
    """
    if not os.path.exists(path):
        raise CheckpointMissing(f"Checkpoint {path} does not exist.")
    with np.load(path) as blob:
        data = {k: blob[k] for k in blob.files}
    if int(data.pop("__version__", [0])[0]) != CHECKPOINT_VERSION:
        raise CheckpointMissing(f"Checkpoint {path} has an unsupported format.")
    for mname, module in modules.items():
        prefix = mname + "/"
        module.load_state_dict(
            {k[len(prefix) :]: v for k, v in data.items() if k.startswith(prefix)}
        )
    return {k: v for k, v in data.items() if "/" not in k}


def numerical_grad(f: Callable[[], float], x: np.ndarray, eps: float = 1e-5) -> np.ndarray:
    """Central finite-difference gradient of a scalar function.

    Each element of `x` is perturbed in place and restored.

    Args:
        f: Function with no arguments returning a scalar computed from
           the current value of `x`.
        x: Array treated as the input.
        eps: Perturbation size.

    Returns:
        Array of the shape of `x`.
    """
    grad = np.zeros_like(x)
    flat = x.reshape(-1)
    gflat = grad.reshape(-1)
    for k in range(flat.size):
        orig = flat[k]
        flat[k] = orig + eps
        fp = f()
        flat[k] = orig - eps
        fm = f()
        flat[k] = orig
        gflat[k] = (fp - fm) / (2.0 * eps)
    return grad
