"""Greedy, beam, and ensemble decoding, plus file-level translation.

All search happens over per-step log-softmax vectors computed in
float64, so hypothesis scores are directly comparable across decoders
and recomputable from sequence scoring to within float32 forward noise.
Ties are broken toward the lowest token id at every choice point, which
makes decoding deterministic on any platform.
"""

import json
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from . import autodiff as ad
from .errors import ConfigError, EnsembleError, InferenceError
from .models.common import BOS_ID, EOS_ID, as_ids
from .subword import decode_pieces, encode

DECODE_MODES = ("greedy", "beam")


@dataclass
class DecodeConfig:
    mode: str = "beam"
    beam_width: int = 5
    max_len: int = 64
    length_penalty: float = 0.0

    def validate(self):
        if self.mode not in DECODE_MODES:
            raise ConfigError("unknown decode mode %r" % self.mode)
        if self.beam_width < 1:
            raise ConfigError("beam_width must be at least 1")
        if self.max_len < 1:
            raise ConfigError("max_len must be at least 1")
        if self.length_penalty < 0:
            raise ConfigError("length_penalty must be non-negative")
        return self

    def to_dict(self):
        return {"mode": self.mode, "beam_width": self.beam_width,
                "max_len": self.max_len, "length_penalty": self.length_penalty}


@dataclass(frozen=True)
class Hypothesis:
    tokens: tuple
    score: float
    finished: bool


def _model_list(models):
    batch = models if isinstance(models, (list, tuple)) else [models]
    if not batch:
        raise EnsembleError("ensemble must contain at least one model")
    vocabs = {m.config.vocab_size for m in batch}
    if len(vocabs) > 1:
        raise EnsembleError("ensemble models disagree on vocabulary size: %s"
                            % sorted(vocabs))
    return list(batch)


def check_ensemble_fingerprints(fingerprints):
    """Models may only ensemble over one shared subword vocabulary."""
    if len(set(fingerprints)) > 1:
        raise EnsembleError(
            "ensemble models were trained with different subword vocabularies")


def ensemble_step_scores(models, src_ids, prefix_ids):
    """Mean over models of the next-token log-softmax, in float64."""
    prefix = np.asarray(prefix_ids, dtype=np.int64)
    rows = []
    for model in models:
        with ad.no_grad():
            logits = model.forward(src_ids, prefix)
        row = logits.data[len(prefix) - 1].astype(np.float64)
        row -= row.max()
        rows.append(row - np.log(np.exp(row).sum()))
    return np.mean(rows, axis=0)


def _ranked(score, tokens, penalty):
    # sort key: best score first, then lowest token ids
    if penalty > 0:
        score = score / (len(tokens) - 1) ** penalty
    return (-score, tokens)


def _fit_to_models(models, src_ids, config):
    """Clamp decoding to the tightest model capacity.

    A hypothesis prefix of config.max_len tokens reaches the models, so
    the cap must not exceed what their position tables cover; overlong
    sources are truncated for the same reason.
    """
    limits = [m.config.max_len for m in models if getattr(m.config, "max_len", 0)]
    if not limits:
        return src_ids, config
    cap = min(limits)
    if len(src_ids) > cap:
        src_ids = src_ids[:cap]
    if config.max_len > cap:
        config = replace(config, max_len=cap)
    return src_ids, config


def greedy_decode(models, src, config):
    """Argmax token per step until EOS or config.max_len tokens emitted."""
    config.validate()
    models = _model_list(models)
    src_ids = as_ids(src)
    src_ids, config = _fit_to_models(models, src_ids, config)
    tokens = (BOS_ID,)
    score = 0.0
    finished = False
    while not finished:
        logp = ensemble_step_scores(models, src_ids, tokens)
        pick = int(np.argmax(logp))
        score += float(logp[pick])
        tokens = tokens + (pick,)
        finished = pick == EOS_ID or len(tokens) - 1 >= config.max_len
    return Hypothesis(tokens=tokens, score=score, finished=True)


def beam_decode(models, src, config):
    """Top-K search by cumulative log-probability.

    Returns (best, completed) where completed holds up to K finished
    hypotheses, best first. A hypothesis finishes on EOS or at
    config.max_len emitted tokens. The pool is capped at K and the
    search stops once every live hypothesis scores below the worst
    pooled one, which cannot change the winner because scores only
    decrease as tokens are appended.
    """
    config.validate()
    models = _model_list(models)
    src_ids = as_ids(src)
    src_ids, config = _fit_to_models(models, src_ids, config)
    k = config.beam_width
    live = [Hypothesis((BOS_ID,), 0.0, False)]
    completed = []
    while live:
        candidates = []
        for hyp in live:
            logp = ensemble_step_scores(models, src_ids, hyp.tokens)
            for token in range(len(logp)):
                candidates.append((hyp.score + float(logp[token]),
                                   hyp.tokens + (token,)))
        candidates.sort(key=lambda c: _ranked(c[0], c[1], config.length_penalty))
        live = []
        for score, tokens in candidates[:k]:
            done = tokens[-1] == EOS_ID or len(tokens) - 1 >= config.max_len
            if done:
                completed.append(Hypothesis(tokens, score, True))
            else:
                live.append(Hypothesis(tokens, score, False))
        if completed:
            completed.sort(key=lambda h: _ranked(h.score, h.tokens, config.length_penalty))
            completed = completed[:k]
            # scores only shrink, so once every live branch is under the
            # worst pooled score nothing can displace the winner; length
            # penalties break that monotonicity, so search to the cap then
            if config.length_penalty == 0:
                worst = completed[-1].score
                if all(h.score < worst for h in live):
                    break
    return completed[0], completed


def decode(models, src, config):
    """Dispatch on config.mode; always returns a single best Hypothesis."""
    if config.mode == "greedy":
        return greedy_decode(models, src, config)
    best, _ = beam_decode(models, src, config)
    return best


def translate_file(models, subword, input_path, output_path, config,
                   scores_path=None):
    """Translate a one-sentence-per-line file.

    Writes the detokenized decode of line i as output line i, plus a
    JSON-lines sidecar of {line, logprob, tokens} where tokens counts
    everything after BOS. Blank source lines pass through blank with a
    zero score. Returns (output_path, scores_path).
    """
    input_path = Path(input_path)
    output_path = Path(output_path)
    if scores_path is None:
        scores_path = output_path.with_name(output_path.name + ".scores.jsonl")
    scores_path = Path(scores_path)
    try:
        text = input_path.read_text(encoding="utf-8")
    except OSError as exc:
        raise InferenceError("cannot read %s: %s" % (input_path, exc)) from exc
    lines = text.splitlines()
    outputs = []
    records = []
    for i, line in enumerate(lines, start=1):
        try:
            src = encode(subword, line)
            if not src.ids:
                outputs.append("")
                records.append({"line": i, "logprob": 0.0, "tokens": 0})
                continue
            hyp = decode(models, src, config)
            outputs.append(decode_pieces(subword, list(hyp.tokens)))
            records.append({"line": i, "logprob": hyp.score,
                            "tokens": len(hyp.tokens) - 1})
        except InferenceError:
            raise
        except Exception as exc:
            raise InferenceError("line %d: %s" % (i, exc)) from exc
    output_path.parent.mkdir(parents=True, exist_ok=True)
    output_path.write_text("".join(s + "\n" for s in outputs), encoding="utf-8")
    scores_path.write_text("".join(json.dumps(r) + "\n" for r in records),
                           encoding="utf-8")
    return output_path, scores_path
