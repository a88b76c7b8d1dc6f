"""AdamW with decoupled weight decay."""

from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigurationError, NumericalError


@dataclass
class AdamWState:
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    weight_decay: float = 1e-5
    step: int = 0
    m: dict = field(default_factory=dict)
    v: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.lr <= 0:
            raise ConfigurationError("learning rate must be positive")
        if not (0 <= self.beta1 < 1 and 0 <= self.beta2 < 1):
            raise ConfigurationError("betas must lie in [0, 1)")
        if self.weight_decay < 0:
            raise ConfigurationError("weight decay must be non-negative")


class AdamW:
    """Bias-corrected Adam on a dict of named parameters.

    Weight decay is applied as ``theta -= lr * wd * theta`` before the
    moment update and only to names in ``decay`` (all names if None).
    Parameters are updated in place.
    """

    def __init__(self, params, lr=1e-3, betas=(0.9, 0.999), eps=1e-8,
                 weight_decay=1e-5, decay=None):
        self.params = dict(params)
        self.decay = set(self.params) if decay is None else set(decay)
        self.state = AdamWState(lr, betas[0], betas[1], eps, weight_decay)
        for k, p in self.params.items():
            self.state.m[k] = np.zeros_like(p.value)
            self.state.v[k] = np.zeros_like(p.value)

    def zero_grad(self):
        for p in self.params.values():
            p.grad = None

    def step(self, grads=None):
        """One update. ``grads`` defaults to each parameter's ``.grad``
        (missing gradients count as zero)."""
        st = self.state
        if grads is None:
            grads = {k: p.grad for k, p in self.params.items()}
        for k, g in grads.items():
            if g is not None and not np.all(np.isfinite(g)):
                raise NumericalError(f"non-finite gradient for parameter {k!r}")
        st.step += 1
        t = st.step
        c1 = 1.0 - st.beta1 ** t
        c2 = 1.0 - st.beta2 ** t
        for k, p in self.params.items():
            g = grads.get(k)
            if g is None:
                g = np.zeros_like(p.value)
            theta = p.value
            if k in self.decay and st.weight_decay:
                theta -= st.lr * st.weight_decay * theta
            m, v = st.m[k], st.v[k]
            m *= st.beta1
            m += (1 - st.beta1) * g
            v *= st.beta2
            v += (1 - st.beta2) * g * g
            theta -= st.lr * (m / c1) / (np.sqrt(v / c2) + st.eps)


def adamw_step(opt, grads=None):
    opt.step(grads)
    return opt.params
