"""Recurrent encoder-decoder with additive attention.

One gated recurrent cell per direction:

    z = sigmoid(x Wxz + h Whz + bz)
    r = sigmoid(x Wxr + h Whr + br)
    n = tanh(x Wxn + r * (h Whn) + bn)
    h' = (1 - z) * h + z * n

The encoder runs the cell both ways, concatenates the directions per
position, and projects back to model_dim.  Each decoder step attends
over the encoder states from the previous decoder state, feeds
[embedding; context] through the cell, and reads logits off
[new state; context].  Padded positions freeze the recurrence so right
padding cannot leak into real states.
"""

from dataclasses import dataclass

import numpy as np

from .. import autodiff as ad
from ..errors import ModelError, ShapeError
from .attention import additive_attention
from .common import glorot, pad_mask

GATES = ("z", "r", "n")


@dataclass
class EncoderState:
    """Per-position source representations plus the last real state."""

    hidden: ad.Tensor  # (batch, src_len, model_dim)
    mask: np.ndarray  # (batch, src_len) bool
    final: ad.Tensor  # (batch, model_dim)


@dataclass
class DecoderState:
    """Recurrent summary of the emitted prefix; step counts emissions."""

    step: int
    hidden: ad.Tensor  # (batch, model_dim)


def rnn_parameters(config, seed, dtype=np.float32):
    rng = np.random.default_rng(seed)
    params = ad.ParameterSet()
    d, v = config.model_dim, config.vocab_size
    params.add("embed", (rng.normal(0.0, d**-0.5, size=(v, d))).astype(dtype))
    _add_gru(params, rng, "enc.fwd", d, d, dtype)
    _add_gru(params, rng, "enc.bwd", d, d, dtype)
    params.add("enc.proj.w", glorot(rng, 2 * d, d, dtype))
    params.add("enc.proj.b", np.zeros(d, dtype=dtype))
    params.add("bridge.w", glorot(rng, d, d, dtype))
    params.add("bridge.b", np.zeros(d, dtype=dtype))
    params.add("attn.ws", glorot(rng, d, d, dtype))
    params.add("attn.wh", glorot(rng, d, d, dtype))
    params.add("attn.b", np.zeros(d, dtype=dtype))
    params.add("attn.v", glorot(rng, d, 1, dtype).reshape(d))
    _add_gru(params, rng, "dec.gru", 2 * d, d, dtype)
    params.add("out.w", glorot(rng, 2 * d, v, dtype))
    params.add("out.b", np.zeros(v, dtype=dtype))
    return params


def _add_gru(params, rng, prefix, in_dim, hidden, dtype):
    for gate in GATES:
        params.add("%s.wx%s" % (prefix, gate), glorot(rng, in_dim, hidden, dtype))
        params.add("%s.wh%s" % (prefix, gate), glorot(rng, hidden, hidden, dtype))
        params.add("%s.b%s" % (prefix, gate), np.zeros(hidden, dtype=dtype))


def gru_step(params, prefix, x, h):
    z = ad.sigmoid(ad.matmul(x, params[prefix + ".wxz"]) + ad.matmul(h, params[prefix + ".whz"]) + params[prefix + ".bz"])
    r = ad.sigmoid(ad.matmul(x, params[prefix + ".wxr"]) + ad.matmul(h, params[prefix + ".whr"]) + params[prefix + ".br"])
    n = ad.tanh(ad.matmul(x, params[prefix + ".wxn"]) + r * ad.matmul(h, params[prefix + ".whn"]) + params[prefix + ".bn"])
    return (1.0 - z) * h + z * n


def _run_direction(params, prefix, embed_steps, mask, dtype):
    """Recurrence over a list of (batch, dim) embeddings, freezing at pads."""
    batch = embed_steps[0].shape[0]
    width = params[prefix + ".whz"].shape[0]
    h = ad.Tensor(np.zeros((batch, width), dtype=dtype))
    states = []
    for x, keep_col in zip(embed_steps, mask.T):
        keep = ad.Tensor(keep_col.astype(dtype)[:, None])
        h = keep * gru_step(params, prefix, x, h) + (1.0 - keep) * h
        states.append(h)
    return states


def rnn_encode_batch(params, config, src_ids, train=False, rng=None):
    src_ids = np.asarray(src_ids)
    batch, src_len = src_ids.shape
    if src_len == 0:
        raise ModelError("empty source sequence", code="empty_input")
    if src_len > config.max_len:
        raise ModelError("source of %d exceeds max_len %d" % (src_len, config.max_len), code="too_long")
    mask = pad_mask(src_ids)
    if not mask.any(axis=1).all():
        raise ModelError("all-padding source row", code="empty_input")
    dtype = params["embed"].dtype
    dropout_p = config.dropout if train else 0.0
    if not train:
        rng = None

    embed_steps = [
        ad.dropout(ad.embedding(params["embed"], src_ids[:, t]), dropout_p, rng)
        for t in range(src_len)
    ]
    fwd = _run_direction(params, "enc.fwd", embed_steps, mask, dtype)
    bwd = list(reversed(_run_direction(params, "enc.bwd", list(reversed(embed_steps)), mask[:, ::-1], dtype)))

    positions = []
    for f, b in zip(fwd, bwd):
        both = ad.concat([f, b], axis=-1)
        proj = ad.matmul(both, params["enc.proj.w"]) + params["enc.proj.b"]
        positions.append(ad.reshape(proj, (batch, 1, config.model_dim)))
    hidden = positions[0] if src_len == 1 else ad.concat(positions, axis=1)

    lengths = mask.sum(axis=1)
    pick = np.zeros((batch, src_len, 1), dtype=dtype)
    pick[np.arange(batch), lengths - 1, 0] = 1.0
    final = ad.sum_(hidden * ad.Tensor(pick), axis=1)
    return EncoderState(hidden=hidden, mask=mask, final=final)


def rnn_initial_state(params, enc):
    s0 = ad.tanh(ad.matmul(enc.final, params["bridge.w"]) + params["bridge.b"])
    return DecoderState(step=0, hidden=s0)


def rnn_decode_step(params, config, prev_ids, state, enc, train=False, rng=None):
    """One teacher-forced or search step: (logits (batch, vocab), next state)."""
    prev_ids = np.asarray(prev_ids)
    if state.hidden.shape[0] != enc.hidden.shape[0]:
        raise ShapeError(
            "decoder batch %d vs encoder batch %d" % (state.hidden.shape[0], enc.hidden.shape[0])
        )
    dropout_p = config.dropout if train else 0.0
    if not train:
        rng = None
    context, _ = additive_attention(params, "attn", state.hidden, enc.hidden, enc.mask)
    x = ad.concat([ad.embedding(params["embed"], prev_ids), context], axis=-1)
    x = ad.dropout(x, dropout_p, rng)
    hidden = gru_step(params, "dec.gru", x, state.hidden)
    readout = ad.concat([hidden, context], axis=-1)
    logits = ad.matmul(readout, params["out.w"]) + params["out.b"]
    return logits, DecoderState(step=state.step + 1, hidden=hidden)


def rnn_batch_logits(params, config, src_ids, tgt_ids, train=False, rng=None):
    """Teacher-forced logits (batch, tgt_len, vocab)."""
    tgt_ids = np.asarray(tgt_ids)
    if tgt_ids.shape[1] > config.max_len:
        raise ModelError("target of %d exceeds max_len %d" % (tgt_ids.shape[1], config.max_len), code="too_long")
    enc = rnn_encode_batch(params, config, src_ids, train=train, rng=rng)
    state = rnn_initial_state(params, enc)
    batch = tgt_ids.shape[0]
    steps = []
    for t in range(tgt_ids.shape[1]):
        logits, state = rnn_decode_step(params, config, tgt_ids[:, t], state, enc, train=train, rng=rng)
        steps.append(ad.reshape(logits, (batch, 1, config.vocab_size)))
    return steps[0] if len(steps) == 1 else ad.concat(steps, axis=1)


def rnn_encode(params, config, tokens):
    """Single-sequence wrapper around the batched encoder."""
    from .common import as_ids

    return rnn_encode_batch(params, config, as_ids(tokens)[None, :])
