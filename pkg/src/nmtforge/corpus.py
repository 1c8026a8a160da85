"""Parallel corpus loading, cleaning, splitting, and overlap removal.

A corpus is a pair of aligned sentence lists (one sentence per line,
UTF-8).  Splitting shuffles deterministically under a seed and then
partitions; valid/test sizes are floored, the remainder goes to train.
"""

import random
from dataclasses import dataclass
from pathlib import Path

from .errors import AlignmentError, EncodingError, SplitSizeError


@dataclass(frozen=True)
class ParallelCorpus:
    """Aligned source/target sentences; pair i is (source_lines[i], target_lines[i])."""

    source_lines: tuple
    target_lines: tuple
    name: str = "corpus"

    def __post_init__(self):
        if len(self.source_lines) != len(self.target_lines):
            raise AlignmentError(
                "source/target length mismatch: %d vs %d"
                % (len(self.source_lines), len(self.target_lines))
            )
        for line in self.source_lines + self.target_lines:
            if "\n" in line:
                raise AlignmentError("sentence contains a newline", code="embedded_newline")

    def __len__(self):
        return len(self.source_lines)

    def pairs(self):
        return list(zip(self.source_lines, self.target_lines))


@dataclass(frozen=True)
class DatasetSplits:
    """Train/valid/test partition of a cleaned corpus."""

    train: ParallelCorpus
    valid: ParallelCorpus
    test: ParallelCorpus
    ratio: tuple

    def parts(self):
        return {"train": self.train, "valid": self.valid, "test": self.test}


def _read_lines(path):
    path = Path(path)
    try:
        raw = path.read_bytes()
    except OSError as exc:
        raise EncodingError("cannot read %s: %s" % (path, exc), code="io_error") from exc
    lines = raw.split(b"\n")
    if lines and lines[-1] == b"":
        lines.pop()
    decoded = []
    for i, line in enumerate(lines, start=1):
        try:
            decoded.append(line.decode("utf-8").rstrip())
        except UnicodeDecodeError as exc:
            raise EncodingError("%s line %d: undecodable bytes (%s)" % (path, i, exc)) from exc
    return decoded


def load_parallel_corpus(source_path, target_path, name="corpus"):
    """Load two one-sentence-per-line files into an aligned corpus.

    Trailing whitespace is stripped; pairs empty on both sides are dropped.
    """
    src = _read_lines(source_path)
    tgt = _read_lines(target_path)
    if len(src) != len(tgt):
        raise AlignmentError("line count mismatch: %d vs %d" % (len(src), len(tgt)))
    kept = [(s, t) for s, t in zip(src, tgt) if s or t]
    return ParallelCorpus(
        source_lines=tuple(s for s, _ in kept),
        target_lines=tuple(t for _, t in kept),
        name=name,
    )


def split_corpus(corpus, ratio, seed):
    """Deterministic seeded shuffle, then partition by the ratio triple.

    |valid| = floor(N * r_valid), |test| = floor(N * r_test); train takes
    the remainder.  Any empty part raises.
    """
    r_train, r_valid, r_test = ratio
    if min(r_train, r_valid, r_test) <= 0:
        raise SplitSizeError("ratio components must be positive: %r" % (ratio,), code="bad_ratio")
    if abs(r_train + r_valid + r_test - 1.0) > 1e-9:
        raise SplitSizeError("ratio must sum to 1: %r" % (ratio,), code="bad_ratio")

    n = len(corpus)
    # tiny epsilon so 0.1 * 30 floors to 3, not 2, despite binary rounding
    n_valid = int(n * r_valid + 1e-9)
    n_test = int(n * r_test + 1e-9)
    n_train = n - n_valid - n_test
    if min(n_train, n_valid, n_test) <= 0:
        raise SplitSizeError(
            "split of %d pairs under ratio %r leaves an empty part (%d/%d/%d)"
            % (n, ratio, n_train, n_valid, n_test)
        )

    order = list(range(n))
    random.Random(seed).shuffle(order)

    def part(indices, suffix):
        return ParallelCorpus(
            source_lines=tuple(corpus.source_lines[i] for i in indices),
            target_lines=tuple(corpus.target_lines[i] for i in indices),
            name="%s.%s" % (corpus.name, suffix),
        )

    train_idx = order[:n_train]
    valid_idx = order[n_train : n_train + n_valid]
    test_idx = order[n_train + n_valid :]
    return DatasetSplits(
        train=part(train_idx, "train"),
        valid=part(valid_idx, "valid"),
        test=part(test_idx, "test"),
        ratio=tuple(ratio),
    )


def deduplicate_overlap(train, test):
    """Drop every train pair whose source line occurs verbatim in the test set."""
    test_sources = set(test.source_lines)
    kept = [(s, t) for s, t in train.pairs() if s not in test_sources]
    return ParallelCorpus(
        source_lines=tuple(s for s, _ in kept),
        target_lines=tuple(t for _, t in kept),
        name=train.name,
    )


def build_shared_corpus(corpus):
    """Source lines followed by target lines, for joint subword training."""
    return list(corpus.source_lines) + list(corpus.target_lines)


def read_splits(out_dir, name):
    """Load splits previously written by write_splits.

    The recorded ratio is recomputed from the actual part sizes.
    """
    out_dir = Path(out_dir)
    parts = {}
    for part_name in ("train", "valid", "test"):
        parts[part_name] = load_parallel_corpus(
            out_dir / ("%s.%s.src" % (name, part_name)),
            out_dir / ("%s.%s.tgt" % (name, part_name)),
            name="%s.%s" % (name, part_name),
        )
    total = sum(len(p.source_lines) for p in parts.values())
    ratio = tuple(
        len(parts[k].source_lines) / total if total else 0.0
        for k in ("train", "valid", "test")
    )
    return DatasetSplits(train=parts["train"], valid=parts["valid"],
                         test=parts["test"], ratio=ratio)


def write_splits(splits, out_dir, name=None):
    """Write {name}.{train,valid,test}.{src,tgt} as LF-terminated UTF-8 files."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    if name is None:
        train_name = splits.train.name
        name = train_name[: -len(".train")] if train_name.endswith(".train") else train_name
    written = []
    for part_name, part in splits.parts().items():
        for suffix, lines in (("src", part.source_lines), ("tgt", part.target_lines)):
            path = out_dir / ("%s.%s.%s" % (name, part_name, suffix))
            data = "".join(line + "\n" for line in lines)
            path.write_text(data, encoding="utf-8", newline="\n")
            written.append(path)
    return written
