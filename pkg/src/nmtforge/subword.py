"""Shared-vocabulary subword models: BPE merges and a unigram LM.

Both kinds pretokenize on whitespace and segment each word separately.
Merging and segmentation operate on plain characters; the word-boundary
marker is attached to the word-initial piece only when pieces are
rendered, so every piece exists in the vocabulary in a marked and an
unmarked variant and decoding is lossless.  Training is deterministic:
ties break lexicographically and floats never depend on iteration order
of an unordered container.
"""

import hashlib
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

from .errors import ConfigError, DecodeError, SubwordError

WORD_MARKER = "▁"
SPECIAL_PIECES = ("<unk>", "<s>", "</s>", "<pad>")
SPECIALS = {"unk_id": 0, "bos_id": 1, "eos_id": 2, "pad_id": 3}
MODEL_VERSION = 1

MAX_PIECE_LEN = 8  # unigram seed substring cap
PRUNE_FRACTION = 0.25
EM_SUB_ITERATIONS = 2


@dataclass
class SubwordModel:
    """A trained subword vocabulary plus whatever its kind needs to segment."""

    kind: str
    vocab: list
    merges: list = field(default_factory=list)
    piece_logprob: dict = field(default_factory=dict)
    specials: dict = field(default_factory=lambda: dict(SPECIALS))
    word_marker: str = WORD_MARKER

    def __post_init__(self):
        if self.kind not in ("bpe", "unigram"):
            raise SubwordError("unknown subword kind: %r" % self.kind, code="bad_kind")
        self._piece_to_id = {piece: i for i, piece in enumerate(self.vocab)}

    @property
    def unk_id(self):
        return self.specials["unk_id"]

    @property
    def bos_id(self):
        return self.specials["bos_id"]

    @property
    def eos_id(self):
        return self.specials["eos_id"]

    @property
    def pad_id(self):
        return self.specials["pad_id"]

    def piece_id(self, piece):
        return self._piece_to_id.get(piece, self.specials["unk_id"])

    def __len__(self):
        return len(self.vocab)


@dataclass(frozen=True)
class TokenSequence:
    """Parallel piece strings and vocabulary ids for one sentence."""

    ids: tuple
    pieces: tuple

    def __post_init__(self):
        if len(self.ids) != len(self.pieces):
            raise SubwordError(
                "ids/pieces length mismatch: %d vs %d" % (len(self.ids), len(self.pieces))
            )

    def __len__(self):
        return len(self.ids)


def _word_frequencies(sentences):
    freq = {}
    for sentence in sentences:
        for word in sentence.split():
            freq[word] = freq.get(word, 0) + 1
    return freq


def _alphabet(word_freq):
    return sorted({ch for word in word_freq for ch in word})


def _check_budget(vocab_size, alphabet):
    # every piece needs a marked and an unmarked vocab entry
    minimum = len(SPECIAL_PIECES) + 2 * len(alphabet)
    if vocab_size < minimum:
        raise ConfigError(
            "vocab_size %d too small: alphabet of %d needs at least %d"
            % (vocab_size, len(alphabet), minimum)
        )


def _base_vocab(alphabet):
    vocab = list(SPECIAL_PIECES)
    for ch in alphabet:
        vocab.append(WORD_MARKER + ch)
        vocab.append(ch)
    return vocab


# -- BPE -----------------------------------------------------------------------


def train_bpe(sentences, vocab_size):
    """Learn merges over word-internal adjacent pairs, most frequent first."""
    word_freq = _word_frequencies(sentences)
    alphabet = _alphabet(word_freq)
    _check_budget(vocab_size, alphabet)

    vocab = _base_vocab(alphabet)
    seen = set(vocab)
    symbolized = {word: tuple(word) for word in word_freq}
    merges = []
    while len(vocab) + 2 <= vocab_size:
        counts = {}
        for word, symbols in symbolized.items():
            freq = word_freq[word]
            for pair in zip(symbols, symbols[1:]):
                counts[pair] = counts.get(pair, 0) + freq
        if not counts:
            break
        best_count = max(counts.values())
        if best_count < 2:
            break
        best = min(pair for pair, c in counts.items() if c == best_count)
        merges.append(best)
        symbolized = {word: _merge_once(symbols, best) for word, symbols in symbolized.items()}
        for variant in (WORD_MARKER + best[0] + best[1], best[0] + best[1]):
            if variant not in seen:
                vocab.append(variant)
                seen.add(variant)
    return SubwordModel(kind="bpe", vocab=vocab, merges=merges)


def _merge_once(symbols, pair):
    """Replace every adjacent occurrence of pair, scanning left to right."""
    a, b = pair
    out = []
    i = 0
    while i < len(symbols):
        if i + 1 < len(symbols) and symbols[i] == a and symbols[i + 1] == b:
            out.append(a + b)
            i += 2
        else:
            out.append(symbols[i])
            i += 1
    return tuple(out)


def apply_bpe(model, sentence):
    """Segment a sentence with the trained merge list, in training order."""
    if model.kind != "bpe":
        raise SubwordError("apply_bpe needs a bpe model, got %s" % model.kind, code="bad_kind")
    pieces = []
    for word in sentence.split():
        symbols = tuple(word)
        for pair in model.merges:
            symbols = _merge_once(symbols, pair)
        pieces.extend(_mark_first(symbols, model.word_marker))
    return _pieces_to_sequence(model, pieces)


def _mark_first(symbols, marker):
    return [marker + s if i == 0 else s for i, s in enumerate(symbols)]


def _pieces_to_sequence(model, pieces):
    ids, surface = [], []
    for piece in pieces:
        pid = model.piece_id(piece)
        ids.append(pid)
        surface.append(model.vocab[pid])
    return TokenSequence(ids=tuple(ids), pieces=tuple(surface))


# -- unigram -------------------------------------------------------------------


def train_unigram(sentences, vocab_size):
    """Seed with frequent substrings, EM-estimate piece probabilities, prune."""
    word_freq = _word_frequencies(sentences)
    alphabet = _alphabet(word_freq)
    _check_budget(vocab_size, alphabet)
    budget = (vocab_size - len(SPECIAL_PIECES)) // 2

    counts = {}
    for word, freq in word_freq.items():
        for start in range(len(word)):
            for stop in range(start + 1, min(start + MAX_PIECE_LEN, len(word)) + 1):
                sub = word[start:stop]
                counts[sub] = counts.get(sub, 0) + freq
    pieces = sorted(sub for sub, c in counts.items() if len(sub) == 1 or c >= 2)

    total = float(sum(counts[p] for p in pieces))
    probs = {p: counts[p] / total for p in pieces}

    while True:
        for _ in range(EM_SUB_ITERATIONS):
            probs = _em_step(word_freq, probs)
        if len(probs) <= budget:
            break
        probs = _prune(probs, budget)
    probs = _em_step(word_freq, probs)

    ordered = sorted(probs)
    vocab = list(SPECIAL_PIECES)
    seen = set(vocab)
    for piece in ordered:
        for variant in (WORD_MARKER + piece, piece):
            if variant not in seen:
                vocab.append(variant)
                seen.add(variant)
    logprob = {piece: math.log(probs[piece]) for piece in ordered}
    return SubwordModel(kind="unigram", vocab=vocab, piece_logprob=logprob)


def _em_step(word_freq, probs):
    """One forward-backward pass; returns renormalized expected counts."""
    expected = {p: 0.0 for p in probs}
    for word, freq in word_freq.items():
        n = len(word)
        alpha = [0.0] * (n + 1)
        alpha[0] = 1.0
        for i in range(1, n + 1):
            acc = 0.0
            for j in range(max(0, i - MAX_PIECE_LEN), i):
                piece = word[j:i]
                if piece in probs:
                    acc += alpha[j] * probs[piece]
            alpha[i] = acc
        if alpha[n] == 0.0:
            continue
        beta = [0.0] * (n + 1)
        beta[n] = 1.0
        for j in range(n - 1, -1, -1):
            acc = 0.0
            for i in range(j + 1, min(j + MAX_PIECE_LEN, n) + 1):
                piece = word[j:i]
                if piece in probs:
                    acc += probs[piece] * beta[i]
            beta[j] = acc
        z = alpha[n]
        for j in range(n):
            for i in range(j + 1, min(j + MAX_PIECE_LEN, n) + 1):
                piece = word[j:i]
                if piece in probs:
                    expected[piece] += freq * alpha[j] * probs[piece] * beta[i] / z
    floor = 1e-10
    total = sum(max(c, floor) for c in expected.values())
    return {p: max(c, floor) / total for p, c in sorted(expected.items())}


def _prune(probs, budget):
    """Drop the lowest-expected-count quarter of multi-char pieces, keep singles."""
    singles = {p for p in probs if len(p) == 1}
    prunable = sorted((probs[p], p) for p in probs if p not in singles)
    over = len(probs) - budget
    k = max(1, int(PRUNE_FRACTION * len(prunable)))
    k = min(k, over, len(prunable))
    doomed = {p for _, p in prunable[:k]}
    kept = {p: c for p, c in probs.items() if p not in doomed}
    total = sum(kept.values())
    return {p: c / total for p, c in sorted(kept.items())}


def segment_unigram(model, sentence):
    """Viterbi segmentation; ties prefer fewer pieces, then leftmost-longest."""
    if model.kind != "unigram":
        raise SubwordError("segment_unigram needs a unigram model, got %s" % model.kind, code="bad_kind")
    pieces = []
    for word in sentence.split():
        segmented = _viterbi(word, model.piece_logprob)
        pieces.extend(_mark_first(segmented, model.word_marker))
    return _pieces_to_sequence(model, pieces)


UNKNOWN_SCORE = -1e9  # worse than any real path, keeps the lattice connected


def _viterbi(word, logprob):
    """Best suffix segmentation per position, right to left.

    Candidate order per position is (score desc, piece count asc, piece
    length desc), so equal-score ties resolve to fewest pieces and then
    to the longest piece at the leftmost position where paths differ.
    """
    n = len(word)
    # best[i]: (score, count, pieces tuple) for word[i:]
    best = [None] * (n + 1)
    best[n] = (0.0, 0, ())
    for i in range(n - 1, -1, -1):
        top = None
        for stop in range(i + 1, min(i + MAX_PIECE_LEN, n) + 1):
            piece = word[i:stop]
            score = logprob.get(piece)
            if score is None:
                if stop - i > 1:
                    continue
                score = UNKNOWN_SCORE
            tail = best[stop]
            if tail is None:
                continue
            candidate = (score + tail[0], tail[1] + 1, stop - i)
            if top is None or (candidate[0], -candidate[1], candidate[2]) > (top[0], -top[1], top[2]):
                top = candidate
                top_pieces = (piece,) + tail[2]
        best[i] = (top[0], top[1], top_pieces)
    return list(best[0][2])


# -- shared surface --------------------------------------------------------------


def encode(model, sentence):
    """Dispatch to the segmenter matching the model kind."""
    if model.kind == "bpe":
        return apply_bpe(model, sentence)
    return segment_unigram(model, sentence)


def decode_pieces(model, tokens):
    """Invert segmentation: concatenate pieces, markers become spaces."""
    ids = tokens.ids if isinstance(tokens, TokenSequence) else tuple(tokens)
    control = {model.bos_id, model.eos_id, model.pad_id}
    chunks = []
    for pid in ids:
        if not 0 <= pid < len(model.vocab):
            raise DecodeError("token id %d outside vocabulary of %d" % (pid, len(model.vocab)))
        if pid in control:
            continue
        chunks.append(model.vocab[pid])
    text = "".join(chunks).replace(model.word_marker, " ")
    return text.strip()


def model_to_dict(model):
    doc = {
        "version": MODEL_VERSION,
        "kind": model.kind,
        "vocab": list(model.vocab),
        "specials": dict(model.specials),
        "word_marker": model.word_marker,
    }
    if model.kind == "bpe":
        doc["merges"] = [list(pair) for pair in model.merges]
    else:
        doc["logprobs"] = dict(model.piece_logprob)
    return doc


def save_subword_model(model, path):
    """Write the model as canonical JSON; identical models give identical bytes."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    payload = json.dumps(model_to_dict(model), ensure_ascii=False, sort_keys=True, indent=2)
    path.write_text(payload + "\n", encoding="utf-8")
    return path


def load_subword_model(path):
    try:
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
    except (OSError, ValueError) as exc:
        raise SubwordError("cannot read subword model %s: %s" % (path, exc), code="bad_model_file") from exc
    if doc.get("version") != MODEL_VERSION:
        raise SubwordError("unsupported subword model version: %r" % doc.get("version"), code="bad_version")
    return SubwordModel(
        kind=doc["kind"],
        vocab=list(doc["vocab"]),
        merges=[tuple(pair) for pair in doc.get("merges", [])],
        piece_logprob=dict(doc.get("logprobs", {})),
        specials=dict(doc["specials"]),
        word_marker=doc["word_marker"],
    )


def subword_fingerprint(model):
    """Stable digest used to refuse mixing incompatible vocabularies."""
    payload = json.dumps(model_to_dict(model), ensure_ascii=False, sort_keys=True)
    return hashlib.sha256(payload.encode("utf-8")).hexdigest()
