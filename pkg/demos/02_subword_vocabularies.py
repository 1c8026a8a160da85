"""
Shared subword vocabularies
===========================

Both segmenters train on one corpus holding source and target text
together, so the two sides of a translation model share every piece.
"""

import tempfile
from pathlib import Path

from nmtforge.subword import (decode_pieces, encode, load_subword_model,
                              save_subword_model, subword_fingerprint,
                              train_bpe, train_unigram)

corpus = [
    "the lowest low",
    "lower than the lowest",
    "new west newest",
    "the newest west is low",
]

# byte pair encoding grows the vocabulary by merging frequent pairs
bpe = train_bpe(corpus, vocab_size=40)
print("bpe pieces:", len(bpe.vocab))
print("first merges:", bpe.merges[:4])

seq = encode(bpe, "the lowest newest low")
print("segmented:", seq.pieces)
print("ids:      ", seq.ids)

# the round trip is lossless for anything over the training alphabet,
# even words the corpus never contained
for text in ("the lowest newest low", "wet towels", "winter rains"):
    assert decode_pieces(bpe, encode(bpe, text)) == text
print("round trips hold, unseen words included")

# the unigram model keeps the highest-likelihood pieces instead and
# segments with exact best-path search
uni = train_unigram(corpus, vocab_size=40)
seq = encode(uni, "the lowest newest low")
print("unigram segmentation:", seq.pieces)

# model files are deterministic: same corpus, same bytes
with tempfile.TemporaryDirectory() as scratch:
    path = Path(scratch) / "subword.json"
    save_subword_model(bpe, path)
    reloaded = load_subword_model(path)
    assert subword_fingerprint(reloaded) == subword_fingerprint(bpe)
    print("fingerprint:", subword_fingerprint(bpe)[:16], "...")
