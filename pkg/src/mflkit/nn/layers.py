"""Layers with explicit forward/backward passes over float64 numpy arrays.

Every layer caches what its backward pass needs on `forward`, so a layer
instance serves one forward/backward pair at a time (training is
single-writer). Convolutions gather kernel-tap patches into one column
matrix and run a single BLAS matmul; the input gradient scatters the column
gradient back through the same taps, which handles any stride.
"""

from __future__ import annotations

import numpy as np


class Parameter:
    """A trainable (or buffer) array with its gradient."""

    __slots__ = ("name", "value", "grad", "trainable")

    def __init__(self, name: str, value: np.ndarray, trainable: bool = True):
        self.name = name
        self.value = np.ascontiguousarray(value, dtype=np.float64)
        self.grad = np.zeros_like(self.value)
        self.trainable = trainable

    def zero_grad(self) -> None:
        self.grad[...] = 0.0


def _uniform_fan_in(rng: np.random.Generator, shape: tuple[int, ...], fan_in: int) -> np.ndarray:
    bound = 1.0 / np.sqrt(fan_in)
    return rng.uniform(-bound, bound, size=shape)


class Layer:
    def forward(self, x: np.ndarray, train: bool = False, rng: np.random.Generator | None = None):
        raise NotImplementedError

    def backward(self, grad: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def parameters(self) -> list[Parameter]:
        return []


class Conv2d(Layer):
    """Affine 2-D convolution (zero padding); the activation is a separate layer.

    `needs_input_grad=False` skips the input-gradient pass, for the layer that
    sits directly on the data.
    """

    def __init__(
        self,
        in_channels: int,
        out_channels: int,
        kernel_size: int,
        stride: int = 1,
        padding: int = 0,
        rng: np.random.Generator | None = None,
        needs_input_grad: bool = True,
    ):
        if padding < 0 or stride < 1:
            raise ValueError("padding must be >= 0 and stride >= 1")
        rng = rng or np.random.default_rng(0)
        self.in_channels = in_channels
        self.out_channels = out_channels
        self.kernel_size = kernel_size
        self.stride = stride
        self.padding = padding
        self.needs_input_grad = needs_input_grad
        fan_in = in_channels * kernel_size * kernel_size
        self.weight = Parameter(
            "weight",
            _uniform_fan_in(rng, (out_channels, in_channels, kernel_size, kernel_size), fan_in),
        )
        self.bias = Parameter("bias", np.zeros(out_channels))
        self._x_shape = None
        self._scratch: dict[str, np.ndarray] = {}

    def parameters(self) -> list[Parameter]:
        return [self.weight, self.bias]

    def _buf(self, key: str, shape: tuple[int, ...]) -> np.ndarray:
        # batch shape is constant across steps, so these big intermediates
        # are reused instead of re-paging fresh allocations every batch
        buf = self._scratch.get(key)
        if buf is None or buf.shape != shape:
            buf = np.empty(shape)
            self._scratch[key] = buf
        return buf

    def _tap_slices(self, u: int, v: int, oh: int, ow: int):
        s = self.stride
        return slice(u, u + (oh - 1) * s + 1, s), slice(v, v + (ow - 1) * s + 1, s)

    def forward(self, x, train=False, rng=None):
        n, c, h, w = x.shape
        if c != self.in_channels:
            raise ValueError(f"expected {self.in_channels} input channels, got {c}")
        k, s, p = self.kernel_size, self.stride, self.padding
        if h + 2 * p < k or w + 2 * p < k:
            raise ValueError("input smaller than kernel")
        # channel-major padded copy: the tap gathers below need no axis permute
        xp = self._buf("xp", (c, n, h + 2 * p, w + 2 * p))
        if p:
            xp.fill(0.0)
        xp[:, :, p : p + h, p : p + w] = x.transpose(1, 0, 2, 3)
        oh = (h + 2 * p - k) // s + 1
        ow = (w + 2 * p - k) // s + 1
        cols = self._buf("cols", (c, k, k, n, oh, ow))
        for u in range(k):
            for v in range(k):
                su, sv = self._tap_slices(u, v, oh, ow)
                cols[:, u, v] = xp[:, :, su, sv]
        cols2 = cols.reshape(c * k * k, n * oh * ow)
        out = self._buf("out", (self.out_channels, n * oh * ow))
        np.matmul(self.weight.value.reshape(self.out_channels, -1), cols2, out=out)
        out += self.bias.value[:, None]
        self._cols_valid = train
        self._x_shape = x.shape
        self._out_hw = (oh, ow)
        return out.reshape(self.out_channels, n, oh, ow).transpose(1, 0, 2, 3).copy()

    def backward(self, grad):
        if not self._cols_valid:
            raise RuntimeError("conv backward requires a preceding training-mode forward")
        n, c, h, w = self._x_shape
        k, s, p = self.kernel_size, self.stride, self.padding
        oh, ow = self._out_hw
        cols2 = self._scratch["cols"].reshape(c * k * k, n * oh * ow)
        gmat = grad.transpose(1, 0, 2, 3).reshape(self.out_channels, n * oh * ow)
        if not gmat.flags.c_contiguous:
            gmat = np.ascontiguousarray(gmat)
        self.bias.grad = gmat.sum(axis=1)
        self.weight.grad = (gmat @ cols2.T).reshape(self.weight.value.shape)
        if not self.needs_input_grad:
            return None
        dcols = self._buf("dcols", (c * k * k, n * oh * ow))
        np.matmul(self.weight.value.reshape(self.out_channels, -1).T, gmat, out=dcols)
        dcols = dcols.reshape(c, k, k, n, oh, ow)
        dxp = self._buf("dxp", (c, n, h + 2 * p, w + 2 * p))
        dxp.fill(0.0)
        for u in range(k):
            for v in range(k):
                su, sv = self._tap_slices(u, v, oh, ow)
                dxp[:, :, su, sv] += dcols[:, u, v]
        dxp = dxp[:, :, p : p + h, p : p + w] if p else dxp
        return dxp.transpose(1, 0, 2, 3).copy()


class Linear(Layer):
    def __init__(self, in_features: int, out_features: int, rng: np.random.Generator | None = None):
        rng = rng or np.random.default_rng(0)
        self.in_features = in_features
        self.out_features = out_features
        self.weight = Parameter("weight", _uniform_fan_in(rng, (out_features, in_features), in_features))
        self.bias = Parameter("bias", np.zeros(out_features))
        self._x = None

    def parameters(self) -> list[Parameter]:
        return [self.weight, self.bias]

    def forward(self, x, train=False, rng=None):
        if x.shape[1] != self.in_features:
            raise ValueError(f"expected {self.in_features} features, got {x.shape[1]}")
        self._x = x
        return x @ self.weight.value.T + self.bias.value

    def backward(self, grad):
        self.weight.grad = grad.T @ self._x
        self.bias.grad = grad.sum(axis=0)
        return grad @ self.weight.value


_POOL_TAPS = ((0, 0), (0, 1), (1, 0), (1, 1))


class MaxPool2d(Layer):
    """2x2 max pooling with stride 2.

    The gradient routes to the block's first maximum in row-major tap order,
    so a constant block sends its gradient to the top-left cell.
    """

    def forward(self, x, train=False, rng=None):
        n, c, h, w = x.shape
        if h % 2 or w % 2:
            raise ValueError(f"maxpool2d needs even spatial dims, got {h}x{w}")
        out = x[:, :, 0::2, 0::2].copy()
        for i, j in _POOL_TAPS[1:]:
            np.maximum(out, x[:, :, i::2, j::2], out=out)
        self._x = x
        self._out = out
        return out

    def backward(self, grad):
        x, out = self._x, self._out
        dx = np.empty_like(x)
        taken = np.zeros(out.shape, dtype=bool)
        for i, j in _POOL_TAPS:
            hit = x[:, :, i::2, j::2] == out
            hit &= ~taken
            dx[:, :, i::2, j::2] = np.where(hit, grad, 0.0)
            taken |= hit
        self._x = self._out = None
        return dx


class BatchNorm2d(Layer):
    """Per-channel batch normalization with running statistics.

    Batch statistics use the biased (1/m) variance, for normalization and for
    the running buffers alike.
    """

    def __init__(self, channels: int, momentum: float = 0.1, eps: float = 1e-5):
        self.channels = channels
        self.momentum = momentum
        self.eps = eps
        self.gamma = Parameter("gamma", np.ones(channels))
        self.beta = Parameter("beta", np.zeros(channels))
        self.running_mean = Parameter("running_mean", np.zeros(channels), trainable=False)
        self.running_var = Parameter("running_var", np.ones(channels), trainable=False)

    def parameters(self) -> list[Parameter]:
        return [self.gamma, self.beta, self.running_mean, self.running_var]

    def forward(self, x, train=False, rng=None):
        if train:
            if x.shape[0] < 2:
                raise ValueError("batchnorm training mode needs batch size >= 2")
            m = x.shape[0] * x.shape[2] * x.shape[3]
            mean = np.einsum("nchw->c", x) / m
            var = np.einsum("nchw,nchw->c", x, x) / m - mean * mean
            np.maximum(var, 0.0, out=var)
            self.running_mean.value = (1 - self.momentum) * self.running_mean.value + self.momentum * mean
            self.running_var.value = (1 - self.momentum) * self.running_var.value + self.momentum * var
        else:
            mean = self.running_mean.value
            var = self.running_var.value
        inv_std = 1.0 / np.sqrt(var + self.eps)
        xhat = x - mean[None, :, None, None]
        xhat *= inv_std[None, :, None, None]
        if train:
            self._xhat = xhat
            self._inv_std = inv_std
        self._train = train
        return self.gamma.value[None, :, None, None] * xhat + self.beta.value[None, :, None, None]

    def backward(self, grad):
        if not self._train:
            scale = self.gamma.value / np.sqrt(self.running_var.value + self.eps)
            return grad * scale[None, :, None, None]
        xhat, inv_std = self._xhat, self._inv_std
        m = grad.shape[0] * grad.shape[2] * grad.shape[3]
        self.gamma.grad = np.einsum("nchw,nchw->c", grad, xhat)
        self.beta.grad = np.einsum("nchw->c", grad)
        coef = self.gamma.value * inv_std
        dx = grad - self.beta.grad[None, :, None, None] / m
        dx -= xhat * (self.gamma.grad / m)[None, :, None, None]
        dx *= coef[None, :, None, None]
        self._xhat = None
        return dx


class Dropout(Layer):
    """Inverted dropout: survivors are scaled by 1/(1-rate); eval is identity."""

    def __init__(self, rate: float):
        if not 0.0 <= rate < 1.0:
            raise ValueError("dropout rate must lie in [0, 1)")
        self.rate = rate
        self._mask = None

    def forward(self, x, train=False, rng=None):
        if not train or self.rate == 0.0:
            self._mask = None
            return x
        if rng is None:
            raise ValueError("dropout in training mode needs an RNG")
        self._mask = (rng.random(x.shape) >= self.rate) / (1.0 - self.rate)
        return x * self._mask

    def backward(self, grad):
        return grad if self._mask is None else grad * self._mask


class LocalResponseNorm(Layer):
    """Cross-channel response normalization: x / (k + a/n * sum x^2)^b."""

    def __init__(self, size: int = 5, alpha: float = 1e-4, beta: float = 0.75, k: float = 2.0):
        if size % 2 == 0:
            raise ValueError("lrn size must be odd")
        self.size = size
        self.alpha = alpha
        self.beta = beta
        self.k = k

    def _window_sum(self, x: np.ndarray) -> np.ndarray:
        half = self.size // 2
        c = x.shape[1]
        cs = np.concatenate([np.zeros_like(x[:, :1]), np.cumsum(x, axis=1)], axis=1)
        hi = np.minimum(np.arange(c) + half + 1, c)
        lo = np.maximum(np.arange(c) - half, 0)
        return cs[:, hi] - cs[:, lo]

    def forward(self, x, train=False, rng=None):
        den = self.k + (self.alpha / self.size) * self._window_sum(x * x)
        self._x = x
        self._den = den
        return x * den ** (-self.beta)

    def backward(self, grad):
        x, den = self._x, self._den
        inner = self._window_sum(grad * x * den ** (-self.beta - 1.0))
        dx = grad * den ** (-self.beta) - (2.0 * self.beta * self.alpha / self.size) * x * inner
        self._x = self._den = None
        return dx


class ReLU(Layer):
    def forward(self, x, train=False, rng=None):
        self._pos = x > 0
        return np.where(self._pos, x, 0.0)

    def backward(self, grad):
        return grad * self._pos


class Sigmoid(Layer):
    def forward(self, x, train=False, rng=None):
        out = np.empty_like(x)
        pos = x >= 0
        out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
        ex = np.exp(x[~pos])
        out[~pos] = ex / (1.0 + ex)
        self._out = out
        return out

    def backward(self, grad):
        return grad * self._out * (1.0 - self._out)


class Softmax(Layer):
    """Row-wise softmax over (N, classes) with max-subtraction for stability."""

    def forward(self, x, train=False, rng=None):
        if x.ndim != 2:
            raise ValueError("softmax expects a (batch, classes) input")
        shifted = x - x.max(axis=1, keepdims=True)
        ex = np.exp(shifted)
        self._out = ex / ex.sum(axis=1, keepdims=True)
        return self._out

    def backward(self, grad):
        p = self._out
        return p * (grad - (grad * p).sum(axis=1, keepdims=True))


class Flatten(Layer):
    def forward(self, x, train=False, rng=None):
        self._shape = x.shape
        return x.reshape(x.shape[0], -1)

    def backward(self, grad):
        return grad.reshape(self._shape)
