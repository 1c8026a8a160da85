"""
Scoring translations
====================

Four corpus-level scores plus perplexity. BLEU and ChrF sit on a 0-100
scale, TER is a rate (lower is better, can pass 1), F1 lives in [0, 1].
"""

from nmtforge.metrics import (EvalPair, chrf_score, corpus_bleu, f1_score,
                              metric_report, perplexity, sentence_bleu,
                              ter_score)

hyps = ["the cat sat on the mat", "a quick fox", "hello world"]
refs = ["the cat sat on the red mat", "the quick brown fox", "hello world"]
pair = EvalPair(hyps, refs)

print("BLEU : %6.2f" % corpus_bleu(pair))
print("TER  : %6.3f" % ter_score(pair))
print("ChrF1: %6.2f" % chrf_score(pair, beta=1.0))
print("ChrF3: %6.2f" % chrf_score(pair, beta=3.0))  # recall weighted 3x
print("F1   : %6.3f" % f1_score(pair))

# corpus BLEU is unsmoothed; the add-one sentence variant never zeroes
# out on a short pair, which keeps per-line reports readable
print("sentence bleu of a 2-gram miss: %.2f" % sentence_bleu("a b", "a c"))

# one call for the whole table, optionally per sentence
report = metric_report(pair, per_sentence=True)
print("report:", {k: round(v, 2) for k, v in report.to_dict().items()
                  if k != "per_sentence"})
for row in report.per_sentence:
    print("  line %d: bleu %.1f ter %.2f" % (row["line"], row["bleu"], row["ter"]))

# perplexity converts summed negative log-likelihood into a per-token
# branching factor; 200 nats over 100 tokens is e^2
print("ppl(200 nats, 100 tokens) = %.3f" % perplexity(200.0, 100))
