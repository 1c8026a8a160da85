"""
Attention and the two architectures
===================================

The same scaled dot-product kernel sits under every transformer layer;
the recurrent model uses an additive score over encoder states instead.
Both expose one forward contract: next-token logits for a prefix.
"""

import numpy as np

from nmtforge import autodiff as ad
from nmtforge.models import ModelConfig, build_model, sequence_log_prob
from nmtforge.models.attention import AttentionInputs, scaled_dot_product_attention

rng = np.random.default_rng(0)

# softmax(Q K^T / sqrt(d_k)) V, nothing more
q = ad.Tensor(rng.normal(size=(2, 4)).astype(np.float32))
k = ad.Tensor(rng.normal(size=(5, 4)).astype(np.float32))
v = ad.Tensor(rng.normal(size=(5, 3)).astype(np.float32))
out = scaled_dot_product_attention(AttentionInputs(q, k, v))
print("attention output shape:", out.data.shape)

# a mask marks what each query may look at; False rows get no weight
mask = np.ones((2, 5), dtype=bool)
mask[0, 2:] = False
masked = scaled_dot_product_attention(AttentionInputs(q, k, v), mask=mask)
print("masked row differs:", not np.allclose(out.data[0], masked.data[0]))

config = ModelConfig(architecture="transformer", layers=2, heads=2,
                     model_dim=32, ff_dim=64, dropout=0.0,
                     attention_dropout=0.0, vocab_size=24, max_len=16)
model = build_model(config, seed=1)

src = np.array([4, 9, 17, 5])
prefix = np.array([1, 7, 12])  # starts at bos
logits = model.forward(src, prefix)
print("transformer logits:", logits.data.shape, "(prefix length x vocab)")

# the recurrent flavor answers the same question through a GRU encoder
# and additive attention over its states
rnn = build_model(ModelConfig(architecture="rnn", model_dim=32,
                              vocab_size=24, dropout=0.0, max_len=16), seed=1)
print("rnn logits:       ", rnn.forward(src, prefix).data.shape)

# teacher forcing scores a whole gold sequence in one pass
tgt = np.array([1, 7, 12, 9, 2])  # bos ... eos
print("log P(tgt | src) = %.3f" % sequence_log_prob(model, src, tgt))
