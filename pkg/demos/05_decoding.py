"""
Greedy search, beam search, ensembles
=====================================

Decoding walks the model one token at a time from bos. Greedy takes the
best next token; beam keeps the K best running hypotheses by summed log
probability. An ensemble averages the per-step distributions of several
models that share a vocabulary.
"""

import random

from nmtforge.inference import DecodeConfig, beam_decode, decode, greedy_decode
from nmtforge.models import ModelConfig, build_model
from nmtforge.subword import decode_pieces, encode, train_bpe

rng = random.Random(4)
corpus = [" ".join(rng.choice("abcde") for _ in range(rng.randint(3, 6)))
          for _ in range(40)]
sub = train_bpe(corpus, 16)

config = ModelConfig(architecture="transformer", layers=1, heads=2,
                     model_dim=16, ff_dim=32, dropout=0.0,
                     attention_dropout=0.0, vocab_size=len(sub.vocab), max_len=32)
# untrained weights decode to nonsense, but the search mechanics do not care
one = build_model(config, seed=7)
two = build_model(config, seed=8)

src = encode(sub, "a b c d")

hyp = greedy_decode(one, src, DecodeConfig(mode="greedy", max_len=8))
print("greedy tokens:", hyp.tokens)
print("greedy score : %.3f" % hyp.score)

best, pool = beam_decode(one, src, DecodeConfig(beam_width=4, max_len=8))
print("beam pool, best first:")
for h in pool:
    print("  %.3f  %s" % (h.score, decode_pieces(sub, list(h.tokens)) or "(empty)"))

# a beam of one is greedy, by construction
narrow, _ = beam_decode(one, src, DecodeConfig(beam_width=1, max_len=8))
assert narrow.tokens == hyp.tokens

# ensembles go through the same entry point: pass a list
together = decode([one, two], src, DecodeConfig(beam_width=4, max_len=8))
print("two-model ensemble picks:", decode_pieces(sub, list(together.tokens)) or "(empty)")
alone = decode([one], src, DecodeConfig(beam_width=4, max_len=8))
assert alone.tokens == best.tokens, "an ensemble of one is just the model"
