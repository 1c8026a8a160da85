"""Model configuration, parameter initialization, and sequence scoring."""

from dataclasses import asdict, dataclass

import numpy as np

from .. import autodiff as ad
from ..errors import ConfigError, ModelError
from .common import BOS_ID, EOS_ID, as_ids
from .rnn import rnn_batch_logits, rnn_parameters
from .transformer import transformer_batch_logits, transformer_parameters

ARCHITECTURES = ("rnn", "transformer")


@dataclass
class ModelConfig:
    """Architecture hyperparameters; defaults follow the tuned values."""

    architecture: str = "transformer"
    layers: int = 6
    heads: int = 8
    model_dim: int = 256
    ff_dim: int = 2048
    dropout: float = 0.3
    attention_dropout: float = 0.1
    label_smoothing: float = 0.1
    vocab_size: int = 0
    max_len: int = 256

    def validate(self):
        if self.architecture not in ARCHITECTURES:
            raise ConfigError("unknown architecture: %r" % self.architecture)
        if self.layers < 1:
            raise ConfigError("layers must be >= 1, got %d" % self.layers)
        if self.model_dim % self.heads != 0:
            raise ConfigError(
                "model_dim %d not divisible by heads %d" % (self.model_dim, self.heads)
            )
        for name in ("dropout", "attention_dropout", "label_smoothing"):
            p = getattr(self, name)
            if not 0.0 <= p < 1.0:
                raise ConfigError("%s must lie in [0, 1), got %r" % (name, p))
        if self.vocab_size < 5:
            raise ConfigError("vocab_size must cover specials plus content, got %d" % self.vocab_size)
        if self.max_len < 2:
            raise ConfigError("max_len must be >= 2, got %d" % self.max_len)
        return self

    def to_dict(self):
        return asdict(self)

    @classmethod
    def from_dict(cls, doc):
        known = {f: doc[f] for f in cls.__dataclass_fields__ if f in doc}
        return cls(**known).validate()


def init_parameters(config, seed, dtype=np.float32):
    config.validate()
    if config.architecture == "rnn":
        return rnn_parameters(config, seed, dtype)
    return transformer_parameters(config, seed, dtype)


@dataclass
class Model:
    """A config plus its parameters; all forwards dispatch on architecture."""

    config: ModelConfig
    params: ad.ParameterSet

    def batch_logits(self, src_ids, tgt_ids, train=False, rng=None):
        if self.config.architecture == "rnn":
            return rnn_batch_logits(self.params, self.config, src_ids, tgt_ids, train=train, rng=rng)
        return transformer_batch_logits(self.params, self.config, src_ids, tgt_ids, train=train, rng=rng)

    def forward(self, src_ids, tgt_prefix_ids):
        """Single-pair logits (tgt_len, vocab)."""
        src, tgt = as_ids(src_ids), as_ids(tgt_prefix_ids)
        out = self.batch_logits(src[None, :], tgt[None, :])
        return ad.reshape(out, (out.shape[1], out.shape[2]))


def build_model(config, seed, dtype=np.float32):
    return Model(config=config, params=init_parameters(config, seed, dtype))


def sequence_log_prob(model, src, tgt):
    """log P(tgt | src) = sum over positions of the gold token's log-softmax."""
    src_ids, tgt_ids = as_ids(src), as_ids(tgt)
    if len(tgt_ids) < 2 or tgt_ids[0] != BOS_ID or tgt_ids[-1] != EOS_ID:
        raise ModelError("target must start with BOS and end with EOS", code="bad_target")
    with ad.no_grad():
        logits = model.forward(src_ids, tgt_ids[:-1])
        logp = ad.log_softmax(logits, axis=-1).data
    gold = tgt_ids[1:]
    return float(logp[np.arange(len(gold)), gold].sum())
