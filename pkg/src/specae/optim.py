"""Adam optimiser over named parameter tensors."""

from dataclasses import dataclass, field

import numpy as np


@dataclass
class AdamState:
    step: int = 0
    m: dict = field(default_factory=dict)
    v: dict = field(default_factory=dict)


def adam_step(params, grads, state, lr=1e-3, beta1=0.9, beta2=0.999, eps=1e-8):
    """Return updated parameter arrays after one bias-corrected Adam step.

    ``params`` and ``grads`` map names to arrays; moment estimates missing
    from ``state`` start at zero.  ``state`` is advanced in place.
    """
    state.step += 1
    t = state.step
    out = {}
    for key, p in params.items():
        g = grads.get(key)
        if g is None:
            out[key] = p
            continue
        m = beta1 * state.m.get(key, np.zeros_like(p)) + (1.0 - beta1) * g
        v = beta2 * state.v.get(key, np.zeros_like(p)) + (1.0 - beta2) * g * g
        state.m[key] = m
        state.v[key] = v
        m_hat = m / (1.0 - beta1 ** t)
        v_hat = v / (1.0 - beta2 ** t)
        out[key] = p - lr * m_hat / (np.sqrt(v_hat) + eps)
    return out


class Adam:
    """Stateful wrapper applying :func:`adam_step` to tensors in place."""

    def __init__(self, params, lr=1e-3, beta1=0.9, beta2=0.999, eps=1e-8):
        self.params = dict(params)
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.state = AdamState()

    def zero_grad(self):
        for p in self.params.values():
            p.grad = None

    def step(self):
        values = {k: p.data for k, p in self.params.items()}
        grads = {k: p.grad for k, p in self.params.items() if p.grad is not None}
        new = adam_step(values, grads, self.state, self.lr, self.beta1, self.beta2, self.eps)
        for k, p in self.params.items():
            p.data = new[k]
