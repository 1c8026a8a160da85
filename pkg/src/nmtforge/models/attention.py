"""Attention kernels: scaled dot-product, multi-head, and additive.

Masks are boolean arrays broadcastable to the score matrix, True where
attention is allowed.  Blocked positions get -inf before the softmax; a
fully blocked row comes back as a zero vector rather than NaN.
"""

import math
from dataclasses import dataclass

import numpy as np

from .. import autodiff as ad
from ..errors import ConfigError, ShapeError


@dataclass
class AttentionInputs:
    """Query/key/value triple; keys and values must pair up row for row."""

    queries: ad.Tensor
    keys: ad.Tensor
    values: ad.Tensor

    def __post_init__(self):
        if self.queries.shape[-1] != self.keys.shape[-1]:
            raise ShapeError(
                "query width %d vs key width %d" % (self.queries.shape[-1], self.keys.shape[-1])
            )
        if self.keys.shape[-2] != self.values.shape[-2]:
            raise ShapeError(
                "%d keys vs %d values" % (self.keys.shape[-2], self.values.shape[-2])
            )

    @property
    def d_k(self):
        return self.keys.shape[-1]


def _mask_bias(mask, dtype):
    return ad.Tensor(np.where(mask, 0.0, -np.inf).astype(dtype))


def scaled_dot_product_attention(inputs, mask=None, dropout_p=0.0, rng=None):
    """softmax(Q Kᵀ / sqrt(d_k)) V with optional masking and weight dropout."""
    q, k, v = inputs.queries, inputs.keys, inputs.values
    ndim = len(k.shape)
    swap = tuple(range(ndim - 2)) + (ndim - 1, ndim - 2)
    scores = ad.matmul(q, ad.transpose(k, swap)) * (1.0 / math.sqrt(inputs.d_k))
    if mask is not None:
        scores = scores + _mask_bias(mask, scores.dtype)
    weights = ad.softmax(scores, axis=-1)
    weights = ad.dropout(weights, dropout_p, rng)
    return ad.matmul(weights, v)


def _split_heads(x, heads):
    batch, length, dim = x.shape
    x = ad.reshape(x, (batch, length, heads, dim // heads))
    return ad.transpose(x, (0, 2, 1, 3))


def _merge_heads(x):
    batch, heads, length, head_dim = x.shape
    x = ad.transpose(x, (0, 2, 1, 3))
    return ad.reshape(x, (batch, length, heads * head_dim))


def multi_head_attention(params, prefix, query, memory, heads, mask=None, dropout_p=0.0, rng=None):
    """Project, attend per head, concatenate, project back.

    Self-attention passes the same tensor as query and memory; cross
    attention feeds the decoder stream as query and encoder output as
    memory.  Expects (batch, length, model_dim) activations.
    """
    dim = query.shape[-1]
    if dim % heads != 0:
        raise ConfigError("model_dim %d not divisible by %d heads" % (dim, heads))
    q = _split_heads(ad.matmul(query, params[prefix + ".wq"]), heads)
    k = _split_heads(ad.matmul(memory, params[prefix + ".wk"]), heads)
    v = _split_heads(ad.matmul(memory, params[prefix + ".wv"]), heads)
    out = scaled_dot_product_attention(AttentionInputs(q, k, v), mask=mask, dropout_p=dropout_p, rng=rng)
    return ad.matmul(_merge_heads(out), params[prefix + ".wo"])


def additive_attention(params, prefix, state, enc_hidden, enc_mask):
    """Bahdanau scoring: e_i = vᵀ tanh(W_s s + W_h h_i + b); returns (context, weights)."""
    batch, src_len, _ = enc_hidden.shape
    attn_dim = params[prefix + ".v"].shape[0]
    proj_state = ad.reshape(ad.matmul(state, params[prefix + ".ws"]), (batch, 1, attn_dim))
    proj_enc = ad.matmul(enc_hidden, params[prefix + ".wh"])
    energy = ad.tanh(proj_state + proj_enc + params[prefix + ".b"])
    scores = ad.reshape(
        ad.matmul(energy, ad.reshape(params[prefix + ".v"], (attn_dim, 1))), (batch, src_len)
    )
    if enc_mask is not None:
        scores = scores + _mask_bias(enc_mask, scores.dtype)
    weights = ad.softmax(scores, axis=-1)
    context = ad.sum_(enc_hidden * ad.reshape(weights, (batch, src_len, 1)), axis=1)
    return context, weights
