"""Initialization and masking helpers shared by both architectures."""

import numpy as np

from ..subword import SPECIALS

UNK_ID = SPECIALS["unk_id"]
BOS_ID = SPECIALS["bos_id"]
EOS_ID = SPECIALS["eos_id"]
PAD_ID = SPECIALS["pad_id"]


def glorot(rng, fan_in, fan_out, dtype):
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=(fan_in, fan_out)).astype(dtype)


def add_norm(params, prefix, dim, dtype):
    params.add(prefix + ".gain", np.ones(dim, dtype=dtype))
    params.add(prefix + ".bias", np.zeros(dim, dtype=dtype))


def apply_norm(params, prefix, x):
    from .. import autodiff as ad

    return ad.layer_norm(x, params[prefix + ".gain"], params[prefix + ".bias"])


def pad_mask(ids):
    """True where a position holds a real token, False at padding."""
    return np.asarray(ids) != PAD_ID


def as_ids(tokens):
    """Accept a TokenSequence or any array-like of ids."""
    ids = getattr(tokens, "ids", tokens)
    return np.asarray(ids, dtype=np.int64)
