"""Parameter updates: bias-corrected Adam (default) and plain SGD fallback."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


class NonFiniteGradientError(ValueError):
    """A gradient contained NaN or Inf; the message names the parameter."""


@dataclass
class AdamState:
    learning_rate: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    step: int = 0
    first_moment: dict = field(default_factory=dict)
    second_moment: dict = field(default_factory=dict)


def adam_step(params, state: AdamState):
    """Apply one bias-corrected Adam update in place.

    params maps names to DiffArray leaves whose .grad fields were filled by a
    backward pass; missing gradients are treated as zero.
    """
    state.step += 1
    b1, b2 = state.beta1, state.beta2
    bc1 = 1.0 - b1 ** state.step
    bc2 = 1.0 - b2 ** state.step
    for name, p in params.items():
        g = p.grad
        if g is None:
            g = np.zeros_like(p.values)
        elif not np.isfinite(g).all():
            raise NonFiniteGradientError(f"non-finite gradient for parameter {name!r}")
        if name not in state.first_moment:
            state.first_moment[name] = np.zeros_like(p.values)
            state.second_moment[name] = np.zeros_like(p.values)
        m, v = state.first_moment[name], state.second_moment[name]
        m *= b1
        m += (1.0 - b1) * g
        v *= b2
        v += (1.0 - b2) * g * g
        p.values -= state.learning_rate * (m / bc1) / (np.sqrt(v / bc2) + state.eps)


@dataclass
class SgdState:
    learning_rate: float = 1e-3
    step: int = 0


def sgd_step(params, state: SgdState):
    state.step += 1
    for name, p in params.items():
        g = p.grad
        if g is None:
            continue
        if not np.isfinite(g).all():
            raise NonFiniteGradientError(f"non-finite gradient for parameter {name!r}")
        p.values -= state.learning_rate * g
