"""Pre-norm transformer encoder-decoder over the shared vocabulary.

Sinusoidal position encodings, residual sublayers wrapped as
x + Dropout(Sublayer(LayerNorm(x))), causal masking in the decoder, and
a final layer norm on each stack.  The whole teacher-forced batch is one
tape so gradients flow through every position at once.
"""

import math

import numpy as np

from .. import autodiff as ad
from ..errors import ModelError
from .attention import multi_head_attention
from .common import add_norm, apply_norm, glorot, pad_mask

_pe_cache = {}


def positional_encoding(length, dim, dtype):
    key = (length, dim, np.dtype(dtype).name)
    if key not in _pe_cache:
        pos = np.arange(length, dtype=np.float64)[:, None]
        idx = np.arange(0, dim, 2, dtype=np.float64)
        angles = pos / np.power(10000.0, idx / dim)
        table = np.zeros((length, dim))
        table[:, 0::2] = np.sin(angles)
        table[:, 1::2] = np.cos(angles[:, : dim // 2])
        _pe_cache[key] = table.astype(dtype)
    return _pe_cache[key]


def transformer_parameters(config, seed, dtype=np.float32):
    rng = np.random.default_rng(seed)
    params = ad.ParameterSet()
    d, f, v = config.model_dim, config.ff_dim, config.vocab_size
    params.add("embed", (rng.normal(0.0, d**-0.5, size=(v, d))).astype(dtype))
    for i in range(config.layers):
        _add_attention(params, rng, "enc.%d.self_attn" % i, d, dtype)
        add_norm(params, "enc.%d.self_norm" % i, d, dtype)
        _add_ff(params, rng, "enc.%d.ff" % i, d, f, dtype)
        add_norm(params, "enc.%d.ff_norm" % i, d, dtype)
    for i in range(config.layers):
        _add_attention(params, rng, "dec.%d.self_attn" % i, d, dtype)
        add_norm(params, "dec.%d.self_norm" % i, d, dtype)
        _add_attention(params, rng, "dec.%d.cross_attn" % i, d, dtype)
        add_norm(params, "dec.%d.cross_norm" % i, d, dtype)
        _add_ff(params, rng, "dec.%d.ff" % i, d, f, dtype)
        add_norm(params, "dec.%d.ff_norm" % i, d, dtype)
    add_norm(params, "enc.norm", d, dtype)
    add_norm(params, "dec.norm", d, dtype)
    params.add("out.w", glorot(rng, d, v, dtype))
    params.add("out.b", np.zeros(v, dtype=dtype))
    return params


def _add_attention(params, rng, prefix, d, dtype):
    for name in ("wq", "wk", "wv", "wo"):
        params.add("%s.%s" % (prefix, name), glorot(rng, d, d, dtype))


def _add_ff(params, rng, prefix, d, f, dtype):
    params.add(prefix + ".w1", glorot(rng, d, f, dtype))
    params.add(prefix + ".b1", np.zeros(f, dtype=dtype))
    params.add(prefix + ".w2", glorot(rng, f, d, dtype))
    params.add(prefix + ".b2", np.zeros(d, dtype=dtype))


def _feed_forward(params, prefix, x, dropout_p, rng):
    hidden = ad.relu(ad.matmul(x, params[prefix + ".w1"]) + params[prefix + ".b1"])
    hidden = ad.dropout(hidden, dropout_p, rng)
    return ad.matmul(hidden, params[prefix + ".w2"]) + params[prefix + ".b2"]


def _embed(params, config, ids, dropout_p, rng):
    dtype = params["embed"].dtype
    x = ad.embedding(params["embed"], ids) * math.sqrt(config.model_dim)
    x = x + ad.Tensor(positional_encoding(ids.shape[1], config.model_dim, dtype))
    return ad.dropout(x, dropout_p, rng)


def _check_lengths(config, *lengths):
    for n in lengths:
        if n == 0:
            raise ModelError("empty token sequence", code="empty_input")
        if n > config.max_len:
            raise ModelError("sequence of %d exceeds max_len %d" % (n, config.max_len), code="too_long")


def transformer_batch_logits(params, config, src_ids, tgt_ids, train=False, rng=None):
    """Teacher-forced logits (batch, tgt_len, vocab) for padded id matrices."""
    src_ids, tgt_ids = np.asarray(src_ids), np.asarray(tgt_ids)
    _check_lengths(config, src_ids.shape[1], tgt_ids.shape[1])
    dropout_p = config.dropout if train else 0.0
    attn_p = config.attention_dropout if train else 0.0
    if not train:
        rng = None

    src_allowed = pad_mask(src_ids)
    enc_mask = src_allowed[:, None, None, :]
    causal = np.tril(np.ones((tgt_ids.shape[1],) * 2, dtype=bool))
    dec_mask = causal[None, None] & pad_mask(tgt_ids)[:, None, None, :]

    x = _embed(params, config, src_ids, dropout_p, rng)
    for i in range(config.layers):
        h = apply_norm(params, "enc.%d.self_norm" % i, x)
        h = multi_head_attention(
            params, "enc.%d.self_attn" % i, h, h, config.heads, mask=enc_mask, dropout_p=attn_p, rng=rng
        )
        x = x + ad.dropout(h, dropout_p, rng)
        h = _feed_forward(params, "enc.%d.ff" % i, apply_norm(params, "enc.%d.ff_norm" % i, x), dropout_p, rng)
        x = x + ad.dropout(h, dropout_p, rng)
    memory = apply_norm(params, "enc.norm", x)

    y = _embed(params, config, tgt_ids, dropout_p, rng)
    for i in range(config.layers):
        h = apply_norm(params, "dec.%d.self_norm" % i, y)
        h = multi_head_attention(
            params, "dec.%d.self_attn" % i, h, h, config.heads, mask=dec_mask, dropout_p=attn_p, rng=rng
        )
        y = y + ad.dropout(h, dropout_p, rng)
        h = apply_norm(params, "dec.%d.cross_norm" % i, y)
        h = multi_head_attention(
            params, "dec.%d.cross_attn" % i, h, memory, config.heads, mask=enc_mask, dropout_p=attn_p, rng=rng
        )
        y = y + ad.dropout(h, dropout_p, rng)
        h = _feed_forward(params, "dec.%d.ff" % i, apply_norm(params, "dec.%d.ff_norm" % i, y), dropout_p, rng)
        y = y + ad.dropout(h, dropout_p, rng)
    y = apply_norm(params, "dec.norm", y)
    return ad.matmul(y, params["out.w"]) + params["out.b"]


def transformer_forward(params, config, src_ids, tgt_prefix_ids, train=False, rng=None):
    """Single-pair forward: logits (tgt_len, vocab)."""
    out = transformer_batch_logits(
        params, config, np.asarray(src_ids)[None, :], np.asarray(tgt_prefix_ids)[None, :], train, rng
    )
    return ad.reshape(out, (out.shape[1], out.shape[2]))
