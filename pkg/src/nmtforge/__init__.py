"""nmtforge: a small neural machine translation toolkit on numpy.

Corpus preparation, shared subword vocabularies, RNN and transformer
models with a built-in reverse-mode tape, training with warmup schedules
and early stopping, beam-search translation, MT metrics, and a serving
layer, all deterministic under a fixed seed.
"""

__version__ = "0.1.0"
