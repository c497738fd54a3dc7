"""Array-level forward/backward kernels for the explicit-gradient core.

All ops work on plain numpy arrays (activations are NCHW for spatial ops,
(N, F) for dense ops) and return ``(output, cache)``; the matching backward
takes ``(grad_out, cache)``. There is no graph tracing: callers compose ops
and run the backwards in reverse order themselves.

Convolution is evaluated as an im2col matmul; its input gradient reuses the
forward kernel on a zero-dilated output gradient with spatially flipped,
channel-swapped weights, so every heavy step is a single matmul.
"""

from __future__ import annotations

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from ..errors import ConfigError, DataError, UsageError


def _require_cache(cache, op: str):
    if cache is None:
        raise UsageError(f"{op}_backward called without a forward cache")
    return cache


# ---------------------------------------------------------------------------
# convolution

def _im2col(x: np.ndarray, kh: int, kw: int, stride: int, padding: int):
    """Return (cols, oh, ow) with cols of shape (N*oh*ow, C*kh*kw)."""
    n, c, h, w = x.shape
    if padding:
        x = np.pad(x, ((0, 0), (0, 0), (padding, padding), (padding, padding)))
    hp, wp = h + 2 * padding, w + 2 * padding
    oh = (hp - kh) // stride + 1
    ow = (wp - kw) // stride + 1
    if oh <= 0 or ow <= 0:
        raise ConfigError(
            f"kernel {kh}x{kw} does not fit input {h}x{w} with padding {padding}"
        )
    win = sliding_window_view(x, (kh, kw), axis=(2, 3))  # (n, c, hp-kh+1, wp-kw+1, kh, kw)
    win = win[:, :, :: stride, :: stride][:, :, :oh, :ow]
    cols = win.transpose(0, 2, 3, 1, 4, 5).reshape(n * oh * ow, c * kh * kw)
    return np.ascontiguousarray(cols), oh, ow


def conv2d_forward(x, w, b, stride: int = 1, padding: int = 0):
    """Cross-correlate NCHW input with OIHW weights.

    Output spatial size is floor((H + 2*pad - K) / stride) + 1 per axis.
    """
    n, c, h, wd = x.shape
    oc, ic, kh, kw = w.shape
    if c != ic:
        raise ConfigError(f"conv2d input has {c} channels but weight expects {ic}")
    if b.shape != (oc,):
        raise ConfigError(f"conv2d bias shape {b.shape} does not match {oc} filters")
    cols, oh, ow = _im2col(x, kh, kw, stride, padding)
    y = cols @ w.reshape(oc, -1).T + b
    y = y.reshape(n, oh, ow, oc).transpose(0, 3, 1, 2)
    cache = (x.shape, cols, w, stride, padding)
    return np.ascontiguousarray(y), cache


def conv2d_backward(gy, cache):
    """Gradients (gx, gw, gb) for conv2d_forward."""
    x_shape, cols, w, stride, padding = _require_cache(cache, "conv2d")
    n, c, h, wd = x_shape
    oc, ic, kh, kw = w.shape
    _, _, oh, ow = gy.shape

    gy_mat = gy.transpose(0, 2, 3, 1).reshape(-1, oc)
    gw = (gy_mat.T @ cols).reshape(w.shape)
    gb = gy_mat.sum(axis=0)

    # Input gradient: dilate gy by the stride, then correlate with the
    # spatially flipped kernel, channels swapped (a "full" correlation).
    if stride > 1:
        gyd = np.zeros((n, oc, (oh - 1) * stride + 1, (ow - 1) * stride + 1), dtype=gy.dtype)
        gyd[:, :, ::stride, ::stride] = gy
    else:
        gyd = gy
    w_flip = np.ascontiguousarray(w[:, :, ::-1, ::-1].transpose(1, 0, 2, 3))
    gyd = np.pad(gyd, ((0, 0), (0, 0), (kh - 1, kh - 1), (kw - 1, kw - 1)))
    cols_g, gh, gw_ = _im2col(gyd, kh, kw, 1, 0)
    gx_full = (cols_g @ w_flip.reshape(ic, -1).T).reshape(n, gh, gw_, ic).transpose(0, 3, 1, 2)
    # Forward may have ignored trailing rows/cols; their gradient is zero.
    hp, wp = h + 2 * padding, wd + 2 * padding
    gx = np.zeros((n, c, hp, wp), dtype=gy.dtype)
    gx[:, :, : gx_full.shape[2], : gx_full.shape[3]] = gx_full[:, :, :hp, :wp]
    if padding:
        gx = gx[:, :, padding : padding + h, padding : padding + wd]
    return np.ascontiguousarray(gx), gw, gb


# ---------------------------------------------------------------------------
# batch normalization

def batchnorm_forward(x, gamma, beta, running_mean, running_var, train: bool,
                      momentum: float = 0.1, eps: float = 1e-5):
    """Normalize per channel; (N, F) uses axis 0, NCHW uses axes (0, 2, 3).

    Train mode normalizes by biased batch statistics and updates the running
    buffers in place (running variance stored unbiased). Eval mode reads the
    running buffers only.
    """
    if x.ndim == 2:
        axes = (0,)
        shape = (1, -1)
    elif x.ndim == 4:
        axes = (0, 2, 3)
        shape = (1, -1, 1, 1)
    else:
        raise ConfigError(f"batchnorm expects 2D or 4D input, got ndim={x.ndim}")

    if train:
        count = x.size // x.shape[1]
        if x.shape[0] < 2:
            raise UsageError("batchnorm train mode needs batch size >= 2")
        mean = x.mean(axis=axes)
        var = x.var(axis=axes)  # biased, used for normalization
        inv_std = 1.0 / np.sqrt(var + eps)
        xhat = (x - mean.reshape(shape)) * inv_std.reshape(shape)
        unbiased = var * (count / (count - 1))
        running_mean *= 1.0 - momentum
        running_mean += momentum * mean
        running_var *= 1.0 - momentum
        running_var += momentum * unbiased
    else:
        inv_std = 1.0 / np.sqrt(running_var + eps)
        xhat = (x - running_mean.reshape(shape)) * inv_std.reshape(shape)
    y = gamma.reshape(shape) * xhat + beta.reshape(shape)
    cache = (xhat, inv_std, gamma, axes, shape, train)
    return y.astype(x.dtype, copy=False), cache


def batchnorm_backward(gy, cache):
    """Gradients (gx, dgamma, dbeta) for batchnorm_forward."""
    xhat, inv_std, gamma, axes, shape, train = _require_cache(cache, "batchnorm")
    dgamma = (gy * xhat).sum(axis=axes)
    dbeta = gy.sum(axis=axes)
    g = gy * gamma.reshape(shape)
    if train:
        m = gy.size // gy.shape[1]
        mean_g = g.sum(axis=axes).reshape(shape) / m
        mean_gx = (g * xhat).sum(axis=axes).reshape(shape) / m
        gx = inv_std.reshape(shape) * (g - mean_g - xhat * mean_gx)
    else:
        gx = g * inv_std.reshape(shape)
    return gx.astype(gy.dtype, copy=False), dgamma, dbeta


# ---------------------------------------------------------------------------
# activations / pooling / dense

def relu_forward(x):
    mask = x > 0
    return x * mask, mask


def relu_backward(gy, cache):
    mask = _require_cache(cache, "relu")
    return gy * mask


def maxpool2_forward(x, need_cache: bool = True):
    """2x2 max pooling with stride 2; odd trailing rows/cols are dropped."""
    n, c, h, w = x.shape
    h2, w2 = h // 2, w // 2
    if h2 == 0 or w2 == 0:
        raise ConfigError(f"maxpool2 needs spatial size >= 2, got {h}x{w}")
    xt = x[:, :, : h2 * 2, : w2 * 2]
    xt = xt.reshape(n, c, h2, 2, w2, 2).transpose(0, 1, 2, 4, 3, 5).reshape(n, c, h2, w2, 4)
    if not need_cache:  # eval path: winner identity not needed
        return np.ascontiguousarray(xt.max(axis=4)), None
    idx = xt.argmax(axis=4)  # deterministic tie-break: first max wins
    y = np.take_along_axis(xt, idx[..., None], axis=4)[..., 0]
    cache = (x.shape, idx)
    return np.ascontiguousarray(y), cache


def maxpool2_backward(gy, cache):
    x_shape, idx = _require_cache(cache, "maxpool2")
    n, c, h, w = x_shape
    h2, w2 = h // 2, w // 2
    gt = np.zeros((n, c, h2, w2, 4), dtype=gy.dtype)
    np.put_along_axis(gt, idx[..., None], gy[..., None], axis=4)
    gt = gt.reshape(n, c, h2, w2, 2, 2).transpose(0, 1, 2, 4, 3, 5).reshape(n, c, h2 * 2, w2 * 2)
    gx = np.zeros(x_shape, dtype=gy.dtype)
    gx[:, :, : h2 * 2, : w2 * 2] = gt
    return gx


def global_avg_pool_forward(x):
    n, c, h, w = x.shape
    return x.mean(axis=(2, 3)), (x.shape,)


def global_avg_pool_backward(gy, cache):
    (x_shape,) = _require_cache(cache, "global_avg_pool")
    n, c, h, w = x_shape
    return np.broadcast_to(gy[:, :, None, None] / (h * w), x_shape).astype(gy.dtype, copy=True)


def linear_forward(x, w, b):
    """x (N, Din) @ w (Din, Dout) + b."""
    if x.shape[1] != w.shape[0]:
        raise ConfigError(f"linear input width {x.shape[1]} does not match weight {w.shape}")
    return x @ w + b, (x, w)


def linear_backward(gy, cache):
    x, w = _require_cache(cache, "linear")
    gw = x.T @ gy
    gb = gy.sum(axis=0)
    gx = gy @ w.T
    return gx, gw, gb


def dropout_forward(x, rate: float, train: bool, rng: np.random.Generator | None = None):
    """Inverted dropout: surviving units are scaled by 1/keep at train time."""
    if not 0.0 <= rate < 1.0:
        raise ConfigError(f"dropout rate must be in [0, 1), got {rate}")
    if not train or rate == 0.0:
        return x, None
    if rng is None:
        raise UsageError("dropout train mode needs a seeded random generator")
    keep = 1.0 - rate
    mask = (rng.random(x.shape) < keep) / keep
    mask = mask.astype(x.dtype, copy=False)
    return x * mask, mask


def dropout_backward(gy, cache):
    if cache is None:  # eval mode / rate 0: identity
        return gy
    return gy * cache


# ---------------------------------------------------------------------------
# loss

def softmax_cross_entropy(logits, labels):
    """Mean cross-entropy over the batch and its gradient w.r.t. logits.

    grad = (softmax - onehot) / batch, stabilized by max-subtraction.
    """
    n, c = logits.shape
    labels = np.asarray(labels)
    bad = (labels < 0) | (labels >= c)
    if bad.any():
        i = int(np.argmax(bad))
        raise DataError(f"label {int(labels[i])} of sample {i} is outside [0, {c})")
    z = logits - logits.max(axis=1, keepdims=True)
    logsumexp = np.log(np.exp(z).sum(axis=1))
    loss = float(np.mean(logsumexp - z[np.arange(n), labels]))
    probs = np.exp(z - logsumexp[:, None])
    probs[np.arange(n), labels] -= 1.0
    grad = (probs / n).astype(logits.dtype, copy=False)
    return loss, grad
