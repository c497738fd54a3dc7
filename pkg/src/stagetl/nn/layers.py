"""Layer objects over the functional kernels in :mod:`stagetl.nn.ops`.

Each layer owns its parameter arrays (updated in place by the optimizer),
keeps the cache of its last forward call, and produces gradients keyed like
its parameters. Composition and naming happen in :mod:`stagetl.nn.model`.
"""

from __future__ import annotations

import numpy as np

from ..errors import UsageError
from . import ops


class Layer:
    def forward(self, x, train: bool = False, rng=None):
        raise NotImplementedError

    def backward(self, gy):
        raise NotImplementedError

    def params(self) -> dict:
        return {}

    def grads(self) -> dict:
        return {}

    def buffers(self) -> dict:
        return {}


class Conv2d(Layer):
    def __init__(self, in_channels, out_channels, kernel_size=3, stride=1,
                 padding=1, *, dtype=np.float32, rng=None):
        rng = rng or np.random.default_rng(0)
        fan_in = in_channels * kernel_size * kernel_size
        self.w = (rng.standard_normal((out_channels, in_channels, kernel_size, kernel_size))
                  * np.sqrt(2.0 / fan_in)).astype(dtype)
        self.b = np.zeros(out_channels, dtype=dtype)
        self.stride = stride
        self.padding = padding
        self.dw = None
        self.db = None
        self._cache = None

    def forward(self, x, train=False, rng=None):
        y, self._cache = ops.conv2d_forward(x, self.w, self.b, self.stride, self.padding)
        return y

    def backward(self, gy):
        gx, self.dw, self.db = ops.conv2d_backward(gy, self._cache)
        return gx

    def params(self):
        return {"weight": self.w, "bias": self.b}

    def grads(self):
        return {"weight": self.dw, "bias": self.db}


class BatchNorm(Layer):
    """Per-channel normalization for dense (N, F) or NCHW activations."""

    def __init__(self, width, *, momentum=0.1, eps=1e-5, dtype=np.float32):
        self.gamma = np.ones(width, dtype=dtype)
        self.beta = np.zeros(width, dtype=dtype)
        self.running_mean = np.zeros(width, dtype=dtype)
        self.running_var = np.ones(width, dtype=dtype)
        self.momentum = momentum
        self.eps = eps
        self.dgamma = None
        self.dbeta = None
        self._cache = None

    def forward(self, x, train=False, rng=None):
        y, self._cache = ops.batchnorm_forward(
            x, self.gamma, self.beta, self.running_mean, self.running_var,
            train, self.momentum, self.eps)
        return y

    def backward(self, gy):
        gx, self.dgamma, self.dbeta = ops.batchnorm_backward(gy, self._cache)
        return gx

    def params(self):
        return {"gamma": self.gamma, "beta": self.beta}

    def grads(self):
        return {"gamma": self.dgamma, "beta": self.dbeta}

    def buffers(self):
        return {"running_mean": self.running_mean, "running_var": self.running_var}


class ReLU(Layer):
    def __init__(self):
        self._cache = None

    def forward(self, x, train=False, rng=None):
        y, self._cache = ops.relu_forward(x)
        return y

    def backward(self, gy):
        return ops.relu_backward(gy, self._cache)


class MaxPool2(Layer):
    def __init__(self):
        self._cache = None

    def forward(self, x, train=False, rng=None):
        y, self._cache = ops.maxpool2_forward(x, need_cache=train)
        return y

    def backward(self, gy):
        return ops.maxpool2_backward(gy, self._cache)


class GlobalAvgPool(Layer):
    def __init__(self):
        self._cache = None

    def forward(self, x, train=False, rng=None):
        y, self._cache = ops.global_avg_pool_forward(x)
        return y

    def backward(self, gy):
        return ops.global_avg_pool_backward(gy, self._cache)


class Linear(Layer):
    def __init__(self, in_width, out_width, *, dtype=np.float32, rng=None,
                 zero_init=False):
        if zero_init:
            # classifier output layer: start at the uniform distribution
            self.w = np.zeros((in_width, out_width), dtype=dtype)
        else:
            rng = rng or np.random.default_rng(0)
            self.w = (rng.standard_normal((in_width, out_width))
                      * np.sqrt(2.0 / in_width)).astype(dtype)
        self.b = np.zeros(out_width, dtype=dtype)
        self.dw = None
        self.db = None
        self._cache = None

    def forward(self, x, train=False, rng=None):
        y, self._cache = ops.linear_forward(x, self.w, self.b)
        return y

    def backward(self, gy):
        gx, self.dw, self.db = ops.linear_backward(gy, self._cache)
        return gx

    def params(self):
        return {"weight": self.w, "bias": self.b}

    def grads(self):
        return {"weight": self.dw, "bias": self.db}


class Dropout(Layer):
    def __init__(self, rate):
        self.rate = float(rate)
        self._cache = None
        self._ran = False

    def forward(self, x, train=False, rng=None):
        y, self._cache = ops.dropout_forward(x, self.rate, train, rng)
        self._ran = True
        return y

    def backward(self, gy):
        if not self._ran:
            raise UsageError("dropout backward called before forward")
        return ops.dropout_backward(gy, self._cache)
