"""Automatic translation quality metrics.

Corpus BLEU is the classical unsmoothed formulation; sentence BLEU
floors zero n-gram counts with add-one smoothing so single sentences
always get a defined score. Tokenization throughout is whitespace
splitting on detokenized text; ChrF works on characters with all
whitespace removed. TER counts edits plus greedy block shifts over
reference tokens and can exceed 1 for insert-heavy hypotheses.
"""

import math
from collections import Counter
from dataclasses import dataclass, field

from .errors import MetricsError

BLEU_ORDER = 4
CHRF_ORDER = 6
METRIC_NAMES = ("bleu", "ter", "chrf1", "chrf3", "f1")


@dataclass
class EvalPair:
    hypotheses: list
    references: list
    lowercase: bool = False

    def validate(self):
        if len(self.hypotheses) != len(self.references):
            raise MetricsError(
                "got %d hypotheses for %d references"
                % (len(self.hypotheses), len(self.references)))
        if not self.hypotheses:
            raise MetricsError("nothing to evaluate")
        return self

    def lines(self):
        for hyp, ref in zip(self.hypotheses, self.references):
            if self.lowercase:
                yield hyp.lower(), ref.lower()
            else:
                yield hyp, ref


@dataclass
class MetricReport:
    bleu: float = None
    ter: float = None
    chrf1: float = None
    chrf3: float = None
    f1: float = None
    per_sentence: list = field(default_factory=list)

    def to_dict(self):
        doc = {name: getattr(self, name) for name in METRIC_NAMES
               if getattr(self, name) is not None}
        if self.per_sentence:
            doc["per_sentence"] = self.per_sentence
        return doc


def _ngrams(tokens, n):
    return Counter(tuple(tokens[i:i + n]) for i in range(len(tokens) - n + 1))


def _clipped(hyp_tokens, ref_tokens, n):
    hyp_counts = _ngrams(hyp_tokens, n)
    ref_counts = _ngrams(ref_tokens, n)
    match = sum(min(c, ref_counts[g]) for g, c in hyp_counts.items())
    return match, max(len(hyp_tokens) - n + 1, 0)


def corpus_bleu(pair):
    """Unsmoothed corpus BLEU, 0..100: geometric mean of clipped n-gram
    precisions up to order 4 times the brevity penalty."""
    pair.validate()
    matches = [0] * BLEU_ORDER
    totals = [0] * BLEU_ORDER
    hyp_len = 0
    ref_len = 0
    for hyp, ref in pair.lines():
        h, r = hyp.split(), ref.split()
        hyp_len += len(h)
        ref_len += len(r)
        for n in range(1, BLEU_ORDER + 1):
            m, t = _clipped(h, r, n)
            matches[n - 1] += m
            totals[n - 1] += t
    if hyp_len == 0 or any(m == 0 for m in matches) or any(t == 0 for t in totals):
        return 0.0
    log_mean = sum(math.log(m / t) for m, t in zip(matches, totals)) / BLEU_ORDER
    bp = 1.0 if hyp_len > ref_len else math.exp(1.0 - ref_len / hyp_len)
    return 100.0 * bp * math.exp(log_mean)


def sentence_bleu(hyp, ref, lowercase=False):
    """Corpus BLEU on one pair, with zero counts floored by add-one.

    Orders longer than the hypothesis are skipped rather than smoothed,
    so a one-token hypothesis is scored on unigrams alone.
    """
    if lowercase:
        hyp, ref = hyp.lower(), ref.lower()
    h, r = hyp.split(), ref.split()
    if not h or not r:
        return 0.0
    log_sum = 0.0
    orders = 0
    for n in range(1, BLEU_ORDER + 1):
        m, t = _clipped(h, r, n)
        if t == 0:
            continue
        if m == 0:
            m, t = 1, t + 1
        log_sum += math.log(m / t)
        orders += 1
    bp = 1.0 if len(h) > len(r) else math.exp(1.0 - len(r) / len(h))
    return 100.0 * bp * math.exp(log_sum / orders)


def _levenshtein(a, b):
    prev = list(range(len(b) + 1))
    for i, x in enumerate(a, start=1):
        cur = [i]
        for j, y in enumerate(b, start=1):
            cur.append(min(prev[j] + 1, cur[j - 1] + 1, prev[j - 1] + (x != y)))
        prev = cur
    return prev[-1]


def _best_shift(hyp, ref):
    """The leftmost block shift that most reduces edit distance, or None."""
    base = _levenshtein(hyp, ref)
    best = None
    best_dist = base
    for i in range(len(hyp)):
        for length in range(1, len(hyp) - i + 1):
            block = hyp[i:i + length]
            rest = hyp[:i] + hyp[i + length:]
            for j in range(len(rest) + 1):
                if j == i:
                    continue
                moved = rest[:j] + block + rest[j:]
                d = _levenshtein(moved, ref)
                if d < best_dist:
                    best_dist = d
                    best = moved
    return best, best_dist if best is not None else base


def ter_score(pair):
    """Translation edit rate: (edits + shifts) / reference tokens.

    Shifts are searched greedily, cost 1 each, and accepted only while
    they strictly reduce the remaining edit distance.
    """
    pair.validate()
    total_cost = 0
    total_ref = 0
    for hyp, ref in pair.lines():
        h, r = hyp.split(), ref.split()
        if not r:
            raise MetricsError("reference line is empty")
        shifts = 0
        while True:
            moved, dist = _best_shift(h, r)
            if moved is None:
                break
            h = moved
            shifts += 1
        total_cost += shifts + _levenshtein(h, r)
        total_ref += len(r)
    return total_cost / total_ref


def _char_ngram_stats(hyp, ref, n):
    h = "".join(hyp.split())
    r = "".join(ref.split())
    hyp_counts = _ngrams(h, n)
    ref_counts = _ngrams(r, n)
    match = sum(min(c, ref_counts[g]) for g, c in hyp_counts.items())
    return match, max(len(h) - n + 1, 0), max(len(r) - n + 1, 0)


def chrf_score(pair, beta=1.0):
    """Character n-gram F-score, 0..100, orders 1..6, whitespace ignored.

    Precision averages over orders where the hypothesis has n-grams,
    recall over orders where the reference does; empty-side pairs score 0.
    """
    if beta <= 0:
        raise MetricsError("beta must be positive")
    pair.validate()
    matches = [0] * CHRF_ORDER
    hyp_totals = [0] * CHRF_ORDER
    ref_totals = [0] * CHRF_ORDER
    for hyp, ref in pair.lines():
        for n in range(1, CHRF_ORDER + 1):
            m, ht, rt = _char_ngram_stats(hyp, ref, n)
            matches[n - 1] += m
            hyp_totals[n - 1] += ht
            ref_totals[n - 1] += rt
    p_terms = [m / t for m, t in zip(matches, hyp_totals) if t > 0]
    r_terms = [m / t for m, t in zip(matches, ref_totals) if t > 0]
    if not p_terms or not r_terms:
        return 0.0
    precision = sum(p_terms) / len(p_terms)
    recall = sum(r_terms) / len(r_terms)
    if precision + recall == 0.0:
        return 0.0
    b2 = beta * beta
    return 100.0 * (1 + b2) * precision * recall / (b2 * precision + recall)


def f1_score(pair):
    """Corpus unigram F1 in [0, 1] from clipped precision and recall."""
    pair.validate()
    match = 0
    hyp_total = 0
    ref_total = 0
    for hyp, ref in pair.lines():
        h, r = hyp.split(), ref.split()
        m, _ = _clipped(h, r, 1)
        match += m
        hyp_total += len(h)
        ref_total += len(r)
    if match == 0 or hyp_total == 0 or ref_total == 0:
        return 0.0
    precision = match / hyp_total
    recall = match / ref_total
    return 2 * precision * recall / (precision + recall)


def perplexity(total_nll, token_count):
    if token_count <= 0:
        raise MetricsError("token count must be positive")
    return math.exp(total_nll / token_count)


def metric_report(pair, metrics=None, per_sentence=False):
    """Score a corpus on the requested metrics (default: all of them)."""
    pair.validate()
    wanted = list(metrics) if metrics else list(METRIC_NAMES)
    unknown = [m for m in wanted if m not in METRIC_NAMES]
    if unknown:
        raise MetricsError("unknown metrics: %s" % ", ".join(sorted(unknown)))
    report = MetricReport()
    scorers = {
        "bleu": corpus_bleu,
        "ter": ter_score,
        "chrf1": lambda p: chrf_score(p, beta=1.0),
        "chrf3": lambda p: chrf_score(p, beta=3.0),
        "f1": f1_score,
    }
    for name in wanted:
        setattr(report, name, scorers[name](pair))
    if per_sentence:
        for i, (hyp, ref) in enumerate(zip(pair.hypotheses, pair.references), start=1):
            one = EvalPair([hyp], [ref], lowercase=pair.lowercase)
            row = {"line": i, "bleu": sentence_bleu(hyp, ref, pair.lowercase)}
            for name in ("ter", "chrf1", "chrf3", "f1"):
                row[name] = scorers[name](one)
            report.per_sentence.append(row)
    return report
