"""SGD with momentum over named parameter sets.

Update convention (normative for checkpoint interchange):
    v <- momentum * v + g
    theta <- theta - lr * v
Velocity buffers are created zeroed and live alongside the parameters they
belong to; both are updated in place.
"""

from __future__ import annotations

import numpy as np

from ..errors import ConfigError, ContractError


class ParamSet:
    """Ordered name -> parameter map with a matching velocity per entry."""

    def __init__(self, params: dict[str, np.ndarray],
                 velocity: dict[str, np.ndarray] | None = None):
        self.params = dict(params)
        if velocity is None:
            velocity = {k: np.zeros_like(v) for k, v in self.params.items()}
        if set(velocity) != set(self.params):
            raise ConfigError("velocity names do not match parameter names")
        for k, v in velocity.items():
            if v.shape != self.params[k].shape:
                raise ConfigError(
                    f"velocity for {k!r} has shape {v.shape}, expected {self.params[k].shape}")
        self.velocity = {k: velocity[k] for k in self.params}

    def param_count(self) -> int:
        return sum(int(v.size) for v in self.params.values())

    def zero_velocity(self) -> None:
        for v in self.velocity.values():
            v[...] = 0


def sgd_momentum_step(pset: ParamSet, grads: dict[str, np.ndarray],
                      lr: float, momentum: float) -> None:
    """One in-place update step; grads must align with the params by name."""
    if set(grads) != set(pset.params):
        missing = sorted(set(pset.params) - set(grads))
        extra = sorted(set(grads) - set(pset.params))
        raise ContractError(
            f"gradient names do not match parameters; missing={missing} extra={extra}")
    for name, p in pset.params.items():
        g = grads[name]
        if g.shape != p.shape:
            raise ContractError(
                f"gradient for {name!r} has shape {g.shape}, expected {p.shape}")
        v = pset.velocity[name]
        v *= momentum
        v += g
        p -= lr * v
