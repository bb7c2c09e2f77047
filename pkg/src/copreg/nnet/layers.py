"""Layer primitives with forward/backward passes on float64 numpy arrays.

Sample shapes exclude the batch axis: dense layers take ``(p,)`` vectors,
convolutional layers ``(length, channels)`` series.  Each layer caches what
its backward pass needs during ``forward(training=True)``; a layer instance
is therefore not reentrant while a gradient step is in flight.
"""

from __future__ import annotations

import numpy as np

from ..errors import ShapeError

ACTIVATIONS = ("relu", "linear")


def _apply_activation(z, activation):
    if activation == "relu":
        return np.maximum(z, 0.0)
    return z


def _activation_grad(z, activation):
    if activation == "relu":
        return (z > 0.0).astype(float)
    return np.ones_like(z)


class Layer:
    """Common interface; concrete layers override the hooks they need."""

    #: trainable parameter names, in flattening order
    param_names: tuple = ()

    def out_shape(self, in_shape):
        raise NotImplementedError

    def forward(self, x, training=False, rng=None):
        raise NotImplementedError

    def backward(self, grad_out):
        raise NotImplementedError

    def params(self):
        return {name: getattr(self, name) for name in self.param_names}

    def l2_penalty(self):
        return 0.0

    def config(self):
        return {}

    def state_arrays(self):
        """Non-trainable arrays that must survive serialization."""
        return {}


class Dense(Layer):
    param_names = ("weights", "bias")

    def __init__(self, weights, bias=None, activation="linear", l2=0.0,
                 use_bias=True):
        self.weights = np.asarray(weights, dtype=float)
        if self.weights.ndim != 2:
            raise ShapeError("dense weights must be (out_dim, in_dim)")
        self.use_bias = bool(use_bias)
        if bias is None:
            bias = np.zeros(self.weights.shape[0])
        self.bias = np.asarray(bias, dtype=float)
        if self.bias.shape != (self.weights.shape[0],):
            raise ShapeError("dense bias length must equal out_dim")
        if activation not in ACTIVATIONS:
            raise ValueError(f"unknown activation {activation!r}")
        self.activation = activation
        if l2 < 0:
            raise ValueError("l2 coefficient must be >= 0")
        self.l2 = float(l2)
        self.grads = {}
        self._cache = None

    @property
    def param_names_active(self):
        return ("weights", "bias") if self.use_bias else ("weights",)

    def out_shape(self, in_shape):
        if len(in_shape) != 1:
            raise ShapeError(f"dense layer expects a vector input, got {in_shape}")
        if in_shape[0] != self.weights.shape[1]:
            raise ShapeError(
                f"dense in_dim {self.weights.shape[1]} != incoming {in_shape[0]}")
        return (self.weights.shape[0],)

    def forward(self, x, training=False, rng=None):
        z = x @ self.weights.T
        if self.use_bias:
            z = z + self.bias
        if training:
            self._cache = (x, z)
        return _apply_activation(z, self.activation)

    def backward(self, grad_out):
        x, z = self._cache
        dz = grad_out * _activation_grad(z, self.activation)
        self.grads["weights"] = dz.T @ x + 2.0 * self.l2 * self.weights
        if self.use_bias:
            self.grads["bias"] = dz.sum(axis=0)
        return dz @ self.weights

    def l2_penalty(self):
        return self.l2 * float(np.sum(self.weights * self.weights))

    def config(self):
        return {"kind": "dense", "activation": self.activation, "l2": self.l2,
                "use_bias": self.use_bias}


class Conv1D(Layer):
    """Valid (unpadded) 1-D convolution; filters shaped (F, K, C)."""

    param_names = ("weights", "bias")

    def __init__(self, weights, bias=None, activation="linear", l2=0.0):
        self.weights = np.asarray(weights, dtype=float)
        if self.weights.ndim != 3:
            raise ShapeError("conv filter bank must be (filters, kernel, channels)")
        if bias is None:
            bias = np.zeros(self.weights.shape[0])
        self.bias = np.asarray(bias, dtype=float)
        if activation not in ACTIVATIONS:
            raise ValueError(f"unknown activation {activation!r}")
        self.activation = activation
        if l2 < 0:
            raise ValueError("l2 coefficient must be >= 0")
        self.l2 = float(l2)
        self.use_bias = True
        self.grads = {}
        self._cache = None

    @property
    def param_names_active(self):
        return ("weights", "bias")

    def out_shape(self, in_shape):
        if len(in_shape) != 2:
            raise ShapeError(f"conv1d expects (length, channels), got {in_shape}")
        length, channels = in_shape
        filters, kernel, in_ch = self.weights.shape
        if channels != in_ch:
            raise ShapeError(f"conv1d channels {in_ch} != incoming {channels}")
        out_len = length - kernel + 1
        if out_len < 1:
            raise ShapeError(
                f"series length {length} shorter than kernel {kernel}")
        return (out_len, filters)

    def forward(self, x, training=False, rng=None):
        filters, kernel, in_ch = self.weights.shape
        lo = x.shape[1] - kernel + 1
        if in_ch == 1:
            # single channel: one GEMM on the (N*Lo, K) window matrix
            cols = np.lib.stride_tricks.sliding_window_view(
                x[:, :, 0], kernel, axis=1).reshape(-1, kernel)
            wmat = self.weights[:, :, 0]
            z = (cols @ wmat.T + self.bias).reshape(x.shape[0], lo, filters)
            cache_cols = cols
        else:
            # multi channel: kernel-shifted GEMMs, BLAS reads the strided
            # slices in place (an im2col copy would dominate here)
            z = np.broadcast_to(self.bias, (x.shape[0], lo, filters)).copy()
            for k in range(kernel):
                z += x[:, k:k + lo, :] @ self.weights[:, k, :].T
            cache_cols = None
        if training:
            self._cache = (x, cache_cols, z)
        return _apply_activation(z, self.activation)

    def backward(self, grad_out):
        x, cols, z = self._cache
        filters, kernel, in_ch = self.weights.shape
        lo = z.shape[1]
        dz = grad_out * _activation_grad(z, self.activation)
        dx = np.zeros(x.shape)
        if in_ch == 1:
            dz2 = dz.reshape(-1, filters)
            dw = (dz2.T @ cols)[:, :, None]
            dcols = (dz2 @ self.weights[:, :, 0]).reshape(
                x.shape[0], lo, kernel)
            for k in range(kernel):
                dx[:, k:k + lo, 0] += dcols[:, :, k]
        else:
            dw = np.empty_like(self.weights)
            for k in range(kernel):
                x_k = x[:, k:k + lo, :]
                # (N, C, Lo) @ (N, Lo, F) summed over the batch
                dw[:, k, :] = np.matmul(
                    x_k.transpose(0, 2, 1), dz).sum(axis=0).T
                dx[:, k:k + lo, :] += dz @ self.weights[:, k, :]
        self.grads["weights"] = dw + 2.0 * self.l2 * self.weights
        self.grads["bias"] = dz.sum(axis=(0, 1))
        return dx

    def l2_penalty(self):
        return self.l2 * float(np.sum(self.weights * self.weights))

    def config(self):
        return {"kind": "conv1d", "activation": self.activation, "l2": self.l2}


class MaxPool1D(Layer):
    def __init__(self, width=2, stride=2):
        if width < 1 or stride < 1:
            raise ValueError("pool width and stride must be positive")
        self.width = int(width)
        self.stride = int(stride)
        self.grads = {}
        self._cache = None

    @property
    def param_names_active(self):
        return ()

    def out_shape(self, in_shape):
        if len(in_shape) != 2:
            raise ShapeError(f"maxpool1d expects (length, channels), got {in_shape}")
        length, channels = in_shape
        out_len = (length - self.width) // self.stride + 1
        if out_len < 1:
            raise ShapeError(f"series length {length} shorter than pool {self.width}")
        return (out_len, channels)

    def forward(self, x, training=False, rng=None):
        if self.width == self.stride:
            n, length, channels = x.shape
            lo = (length - self.width) // self.stride + 1
            blocks = x[:, :lo * self.stride, :].reshape(
                n, lo, self.stride, channels)
            idx = blocks.argmax(axis=2)
            out = np.take_along_axis(blocks, idx[:, :, None, :], axis=2)[:, :, 0, :]
            if training:
                self._cache = ("block", idx, x.shape)
            return out
        windows = np.lib.stride_tricks.sliding_window_view(
            x, self.width, axis=1)[:, ::self.stride]
        idx = windows.argmax(axis=-1)
        out = np.take_along_axis(windows, idx[..., None], axis=-1)[..., 0]
        if training:
            self._cache = ("scatter", idx, x.shape)
        return out

    def backward(self, grad_out):
        mode, idx, x_shape = self._cache
        dx = np.zeros(x_shape)
        if mode == "block":
            n, lo, channels = idx.shape
            dblocks = np.zeros((n, lo, self.stride, channels))
            np.put_along_axis(dblocks, idx[:, :, None, :],
                              grad_out[:, :, None, :], axis=2)
            dx[:, :lo * self.stride, :] = dblocks.reshape(
                n, lo * self.stride, channels)
            return dx
        n_ix, lo_ix, c_ix = np.indices(idx.shape)
        l_ix = lo_ix * self.stride + idx
        np.add.at(dx, (n_ix, l_ix, c_ix), grad_out)
        return dx

    def config(self):
        return {"kind": "maxpool1d", "width": self.width, "stride": self.stride}


class BatchNorm(Layer):
    """Normalization over all axes but the last (channels)."""

    param_names = ("gamma", "beta")

    def __init__(self, channels, momentum=0.99, eps=1e-5, gamma=None, beta=None,
                 running_mean=None, running_var=None):
        self.channels = int(channels)
        self.momentum = float(momentum)
        self.eps = float(eps)
        self.gamma = np.ones(channels) if gamma is None else np.asarray(gamma, float)
        self.beta = np.zeros(channels) if beta is None else np.asarray(beta, float)
        self.running_mean = (np.zeros(channels) if running_mean is None
                             else np.asarray(running_mean, float))
        self.running_var = (np.ones(channels) if running_var is None
                            else np.asarray(running_var, float))
        self.grads = {}
        self._cache = None

    @property
    def param_names_active(self):
        return ("gamma", "beta")

    def out_shape(self, in_shape):
        if in_shape[-1] != self.channels:
            raise ShapeError(
                f"batchnorm channels {self.channels} != incoming {in_shape[-1]}")
        return in_shape

    def forward(self, x, training=False, rng=None):
        axes = tuple(range(x.ndim - 1))
        if training:
            mu = x.mean(axis=axes)
            var = x.var(axis=axes)
            inv_std = 1.0 / np.sqrt(var + self.eps)
            xhat = (x - mu) * inv_std
            self.running_mean = (self.momentum * self.running_mean
                                 + (1.0 - self.momentum) * mu)
            self.running_var = (self.momentum * self.running_var
                                + (1.0 - self.momentum) * var)
            self._cache = (xhat, inv_std, axes)
        else:
            inv_std = 1.0 / np.sqrt(self.running_var + self.eps)
            xhat = (x - self.running_mean) * inv_std
        return self.gamma * xhat + self.beta

    def backward(self, grad_out):
        xhat, inv_std, axes = self._cache
        m = xhat.size // xhat.shape[-1]
        self.grads["gamma"] = (grad_out * xhat).sum(axis=axes)
        self.grads["beta"] = grad_out.sum(axis=axes)
        dxhat = grad_out * self.gamma
        term = (m * dxhat - dxhat.sum(axis=axes, keepdims=True)
                - xhat * (dxhat * xhat).sum(axis=axes, keepdims=True))
        return inv_std / m * term

    def config(self):
        return {"kind": "batchnorm", "channels": self.channels,
                "momentum": self.momentum, "eps": self.eps}

    def state_arrays(self):
        return {"running_mean": self.running_mean, "running_var": self.running_var}


class Dropout(Layer):
    def __init__(self, rate):
        if not 0.0 <= rate < 1.0:
            raise ValueError("dropout rate must lie in [0, 1)")
        self.rate = float(rate)
        self.grads = {}
        self._cache = None

    @property
    def param_names_active(self):
        return ()

    def out_shape(self, in_shape):
        return in_shape

    def forward(self, x, training=False, rng=None):
        if not training or self.rate == 0.0:
            self._cache = None
            return x
        if rng is None:
            raise ValueError("training-mode dropout needs an rng")
        keep = rng.random(x.shape) >= self.rate
        scale = 1.0 / (1.0 - self.rate)
        self._cache = keep
        return x * keep * scale

    def backward(self, grad_out):
        if self._cache is None:
            return grad_out
        return grad_out * self._cache / (1.0 - self.rate)

    def config(self):
        return {"kind": "dropout", "rate": self.rate}


class Flatten(Layer):
    def __init__(self):
        self.grads = {}
        self._cache = None

    @property
    def param_names_active(self):
        return ()

    def out_shape(self, in_shape):
        return (int(np.prod(in_shape)),)

    def forward(self, x, training=False, rng=None):
        if training:
            self._cache = x.shape
        return x.reshape(x.shape[0], -1)

    def backward(self, grad_out):
        return grad_out.reshape(self._cache)

    def config(self):
        return {"kind": "flatten"}
