"""Parameter updates: plain SGD, Adam with inverse-square-root warmup,
and the exponential moving average kept alongside the raw weights.
"""

import math
from dataclasses import asdict, dataclass, field

import numpy as np

from .errors import ConfigError, StateError

OPTIMIZER_KINDS = ("sgd", "adam")


@dataclass
class OptimizerConfig:
    kind: str = "adam"
    learning_rate: float = 2.0
    warmup_steps: int = 8000
    beta1: float = 0.9
    beta2: float = 0.998
    eps: float = 1e-9
    average_decay: float = 0.0001
    batch_tokens: int = 2048
    max_steps: int = 40000
    valid_every: int = 500

    def validate(self):
        if self.kind not in OPTIMIZER_KINDS:
            raise ConfigError("unknown optimizer %r, expected one of %s" % (self.kind, list(OPTIMIZER_KINDS)))
        if self.learning_rate <= 0:
            raise ConfigError("learning_rate must be positive")
        if self.warmup_steps < 1:
            raise ConfigError("warmup_steps must be at least 1")
        for name in ("beta1", "beta2"):
            b = getattr(self, name)
            if not 0.0 <= b < 1.0:
                raise ConfigError("%s must lie in [0, 1), got %r" % (name, b))
        if self.eps <= 0:
            raise ConfigError("eps must be positive")
        if not 0.0 <= self.average_decay <= 1.0:
            raise ConfigError("average_decay must lie in [0, 1]")
        if self.batch_tokens < 1 or self.max_steps < 1 or self.valid_every < 1:
            raise ConfigError("batch_tokens, max_steps and valid_every must be at least 1")
        return self

    def to_dict(self):
        return asdict(self)

    @classmethod
    def from_dict(cls, data):
        known = {f for f in cls.__dataclass_fields__}
        cfg = cls(**{k: v for k, v in data.items() if k in known})
        return cfg.validate()


def effective_rate(config, model_dim, step):
    """Learning rate at a given step: linear warmup, then inverse-sqrt decay.

    Peaks exactly when step == warmup_steps, where both branches of the
    min agree.
    """
    if step < 1:
        raise StateError("step counter starts at 1, got %r" % step)
    scale = min(step ** -0.5, step * config.warmup_steps ** -1.5)
    return config.learning_rate * scale * model_dim ** -0.5


def _grads(params):
    out = []
    for name, tensor in params.items():
        if tensor.grad is None:
            raise StateError("parameter %r has no gradient buffer; run backward first" % name)
        out.append((name, tensor))
    return out


def sgd_update(params, learning_rate):
    """theta <- theta - lr * grad, elementwise, then clear gradients."""
    for _, tensor in _grads(params):
        tensor.data -= learning_rate * tensor.grad
    params.zero_grad()


class AdamState:
    """First and second moment accumulators, keyed by parameter name."""

    def __init__(self):
        self.m = {}
        self.v = {}

    def _slot(self, name, like):
        if name not in self.m:
            self.m[name] = np.zeros_like(like)
            self.v[name] = np.zeros_like(like)
        return self.m[name], self.v[name]


def adam_update(params, state, config, model_dim, step):
    """One Adam step with bias correction at the warmup-scheduled rate.

    Gradients are cleared afterwards so a stale backward pass cannot be
    applied twice.
    """
    lr = effective_rate(config, model_dim, step)
    b1, b2 = config.beta1, config.beta2
    c1 = 1.0 - b1 ** step
    c2 = 1.0 - b2 ** step
    for name, tensor in _grads(params):
        g = tensor.grad
        m, v = state._slot(name, tensor.data)
        m *= b1
        m += (1.0 - b1) * g
        v *= b2
        v += (1.0 - b2) * g * g
        m_hat = m / c1
        v_hat = v / c2
        tensor.data -= lr * m_hat / (np.sqrt(v_hat) + config.eps)
    params.zero_grad()


class ParameterAverage:
    """Running average theta_bar <- (1 - decay) * theta_bar + decay * theta.

    decay == 0 disables smoothing entirely: the average tracks the raw
    weights exactly.
    """

    def __init__(self, params, decay):
        if not 0.0 <= decay <= 1.0:
            raise ConfigError("average decay must lie in [0, 1]")
        self.decay = decay
        self.values = {name: np.array(t.data, copy=True) for name, t in params.items()}

    def update(self, params):
        if self.decay == 0.0:
            for name, tensor in params.items():
                np.copyto(self.values[name], tensor.data)
            return
        d = self.decay
        for name, tensor in params.items():
            avg = self.values[name]
            avg *= 1.0 - d
            avg += d * tensor.data

    def value_dict(self):
        return dict(self.values)
