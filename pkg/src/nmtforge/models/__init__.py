"""Model architectures: recurrent with additive attention, and transformer."""

from .attention import (
    AttentionInputs,
    additive_attention,
    multi_head_attention,
    scaled_dot_product_attention,
)
from .base import Model, ModelConfig, build_model, init_parameters, sequence_log_prob
from .common import BOS_ID, EOS_ID, PAD_ID, UNK_ID, pad_mask
from .rnn import (
    DecoderState,
    EncoderState,
    gru_step,
    rnn_batch_logits,
    rnn_decode_step,
    rnn_encode,
    rnn_encode_batch,
    rnn_initial_state,
)
from .transformer import positional_encoding, transformer_batch_logits, transformer_forward

__all__ = [
    "AttentionInputs",
    "BOS_ID",
    "DecoderState",
    "EOS_ID",
    "EncoderState",
    "Model",
    "ModelConfig",
    "PAD_ID",
    "UNK_ID",
    "additive_attention",
    "build_model",
    "gru_step",
    "init_parameters",
    "multi_head_attention",
    "pad_mask",
    "positional_encoding",
    "rnn_batch_logits",
    "rnn_decode_step",
    "rnn_encode",
    "rnn_encode_batch",
    "rnn_initial_state",
    "scaled_dot_product_attention",
    "sequence_log_prob",
    "transformer_batch_logits",
    "transformer_forward",
]
