"""Central finite-difference checks for every layer type.

Each check builds a double-precision fixture, forms a scalar loss (a fixed
random projection of the layer output, or the cross-entropy itself), and
compares the analytic gradient at randomly drawn coordinates against
(L(x+h) - L(x-h)) / 2h. The reported figure per layer is the worst
relative error max|analytic - fd| / max(1, |analytic|, |fd|).
"""

from __future__ import annotations

import numpy as np

from ..seeding import stream
from . import ops

DEFAULT_TOL = 1e-5


def rel_error(a: float, b: float) -> float:
    return abs(a - b) / max(1.0, abs(a), abs(b))


def check_coords(loss_fn, arrays: dict[str, np.ndarray],
                 grads: dict[str, np.ndarray], rng: np.random.Generator,
                 n_coords: int = 10, h: float = 1e-5) -> float:
    """Worst relative error over ``n_coords`` random coordinates per array."""
    worst = 0.0
    for name, arr in arrays.items():
        g = grads[name]
        for _ in range(n_coords):
            idx = tuple(int(rng.integers(0, s)) for s in arr.shape)
            orig = arr[idx]
            arr[idx] = orig + h
            lp = loss_fn()
            arr[idx] = orig - h
            lm = loss_fn()
            arr[idx] = orig
            fd = (lp - lm) / (2.0 * h)
            worst = max(worst, rel_error(float(g[idx]), fd))
    return worst


def _projection_loss(forward, proj):
    return float((forward() * proj).sum())


def layer_suite(seed: int = 0, n_coords: int = 10) -> dict[str, float]:
    """Worst finite-difference relative error per layer type."""
    results: dict[str, float] = {}

    def run(name, fixture):
        rng = stream(seed, "gradcheck", name)
        arrays, grads, loss_fn = fixture(rng)
        results[name] = check_coords(loss_fn, arrays, grads, rng, n_coords)

    def conv2d(rng):
        x = rng.standard_normal((2, 2, 6, 6))
        w = rng.standard_normal((3, 2, 3, 3))
        b = rng.standard_normal(3)
        y, cache = ops.conv2d_forward(x, w, b, stride=1, padding=1)
        proj = rng.standard_normal(y.shape)
        gx, gw, gb = ops.conv2d_backward(proj, cache)
        loss = lambda: _projection_loss(
            lambda: ops.conv2d_forward(x, w, b, stride=1, padding=1)[0], proj)
        return {"x": x, "w": w, "b": b}, {"x": gx, "w": gw, "b": gb}, loss

    def batchnorm2d(rng):
        x = rng.standard_normal((5, 3, 4, 4))
        gamma = rng.standard_normal(3) + 1.5
        beta = rng.standard_normal(3)
        rm, rv = np.zeros(3), np.ones(3)

        def fwd():
            return ops.batchnorm_forward(x, gamma, beta, rm.copy(), rv.copy(), True)[0]

        y, cache = ops.batchnorm_forward(x, gamma, beta, rm.copy(), rv.copy(), True)
        proj = rng.standard_normal(y.shape)
        gx, dg, db = ops.batchnorm_backward(proj, cache)
        loss = lambda: _projection_loss(fwd, proj)
        return ({"x": x, "gamma": gamma, "beta": beta},
                {"x": gx, "gamma": dg, "beta": db}, loss)

    def batchnorm1d(rng):
        x = rng.standard_normal((7, 5))
        gamma = rng.standard_normal(5) + 1.5
        beta = rng.standard_normal(5)
        rm, rv = np.zeros(5), np.ones(5)

        def fwd():
            return ops.batchnorm_forward(x, gamma, beta, rm.copy(), rv.copy(), True)[0]

        y, cache = ops.batchnorm_forward(x, gamma, beta, rm.copy(), rv.copy(), True)
        proj = rng.standard_normal(y.shape)
        gx, dg, db = ops.batchnorm_backward(proj, cache)
        loss = lambda: _projection_loss(fwd, proj)
        return ({"x": x, "gamma": gamma, "beta": beta},
                {"x": gx, "gamma": dg, "beta": db}, loss)

    def relu(rng):
        # keep inputs away from the kink so central differences are valid
        x = rng.standard_normal((4, 3, 5, 5))
        x += np.sign(x) * 0.05
        y, cache = ops.relu_forward(x)
        proj = rng.standard_normal(y.shape)
        gx = ops.relu_backward(proj, cache)
        loss = lambda: _projection_loss(lambda: ops.relu_forward(x)[0], proj)
        return {"x": x}, {"x": gx}, loss

    def maxpool2(rng):
        # distinct values in every window so the argmax never flips under h
        x = rng.permutation(2 * 3 * 6 * 6).astype(np.float64).reshape(2, 3, 6, 6)
        y, cache = ops.maxpool2_forward(x)
        proj = rng.standard_normal(y.shape)
        gx = ops.maxpool2_backward(proj, cache)
        loss = lambda: _projection_loss(lambda: ops.maxpool2_forward(x)[0], proj)
        return {"x": x}, {"x": gx}, loss

    def global_avg_pool(rng):
        x = rng.standard_normal((3, 4, 5, 5))
        y, cache = ops.global_avg_pool_forward(x)
        proj = rng.standard_normal(y.shape)
        gx = ops.global_avg_pool_backward(proj, cache)
        loss = lambda: _projection_loss(lambda: ops.global_avg_pool_forward(x)[0], proj)
        return {"x": x}, {"x": gx}, loss

    def linear(rng):
        x = rng.standard_normal((4, 7))
        w = rng.standard_normal((7, 3))
        b = rng.standard_normal(3)
        y, cache = ops.linear_forward(x, w, b)
        proj = rng.standard_normal(y.shape)
        gx, gw, gb = ops.linear_backward(proj, cache)
        loss = lambda: _projection_loss(lambda: ops.linear_forward(x, w, b)[0], proj)
        return {"x": x, "w": w, "b": b}, {"x": gx, "w": gw, "b": gb}, loss

    def dropout(rng):
        x = rng.standard_normal((6, 8))
        mask_seed = int(rng.integers(0, 2**32))

        def fwd():
            return ops.dropout_forward(x, 0.3, True, np.random.default_rng(mask_seed))[0]

        y, cache = ops.dropout_forward(x, 0.3, True, np.random.default_rng(mask_seed))
        proj = rng.standard_normal(y.shape)
        gx = ops.dropout_backward(proj, cache)
        loss = lambda: _projection_loss(fwd, proj)
        return {"x": x}, {"x": gx}, loss

    def softmax_cross_entropy(rng):
        logits = rng.standard_normal((5, 6))
        labels = rng.integers(0, 6, 5)
        _, grad = ops.softmax_cross_entropy(logits, labels)
        loss = lambda: ops.softmax_cross_entropy(logits, labels)[0]
        return {"logits": logits}, {"logits": grad}, loss

    for name, fixture in [
        ("conv2d", conv2d),
        ("batchnorm2d", batchnorm2d),
        ("batchnorm1d", batchnorm1d),
        ("relu", relu),
        ("maxpool2", maxpool2),
        ("global_avg_pool", global_avg_pool),
        ("linear", linear),
        ("dropout", dropout),
        ("softmax_cross_entropy", softmax_cross_entropy),
    ]:
        run(name, fixture)
    return results
