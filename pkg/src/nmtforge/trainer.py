"""The training loop: token-bucketed batches, label-smoothed MLE,
scheduled Adam or SGD, parameter averaging, periodic validation with
early stopping, and an append-only telemetry log.

Every source of randomness is seeded, and the wall clock is injectable,
so two runs with the same inputs produce byte-identical telemetry and
checkpoints.
"""

import hashlib
import json
import math
import random
import time
import urllib.request
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from . import autodiff as ad
from .checkpoint import save_checkpoint
from .errors import ConfigError, DivergenceError
from .models import Model, init_parameters
from .models.common import PAD_ID
from .optim import (AdamState, OptimizerConfig, ParameterAverage,
                    adam_update, effective_rate, sgd_update)
from .subword import encode, subword_fingerprint

TELEMETRY_FILE = "telemetry.jsonl"
EVAL_BATCH_TOKENS = 2048


@dataclass
class EarlyStopPolicy:
    patience: int = 4

    def validate(self):
        if self.patience < 1:
            raise ConfigError("patience must be at least 1")
        return self


class EarlyStopTracker:
    """Counts consecutive validations whose accuracy failed to improve.

    Improvement means strictly beating the best accuracy seen so far;
    matching it counts against patience.
    """

    def __init__(self, patience):
        self.patience = patience
        self.best = float("-inf")
        self.best_index = -1
        self.streak = 0
        self.seen = 0

    def observe(self, accuracy):
        """Record one validation; returns True when it improved."""
        self.seen += 1
        if accuracy > self.best:
            self.best = accuracy
            self.best_index = self.seen
            self.streak = 0
            return True
        self.streak += 1
        return False

    @property
    def should_stop(self):
        return self.streak >= self.patience


@dataclass
class TrainingRun:
    run_id: str
    config: object
    optimizer: OptimizerConfig
    seed: int
    out_dir: Path
    steps_completed: int = 0
    stopped: str = ""
    best_accuracy: float = 0.0
    best_step: int = 0
    wall_hours: float = 0.0
    records: list = field(default_factory=list)
    telemetry_path: Path = None
    checkpoint_path: Path = None
    notify_error: str = None

    def summary(self):
        return {
            "event": "training_complete",
            "run_id": self.run_id,
            "steps": self.steps_completed,
            "stopped": self.stopped,
            "best_accuracy": self.best_accuracy,
            "best_step": self.best_step,
            "wall_hours": self.wall_hours,
        }


def derive_run_id(config, optimizer, policy, seed):
    doc = json.dumps(
        {
            "model": config.to_dict(),
            "optimizer": optimizer.to_dict(),
            "patience": policy.patience,
            "seed": seed,
        },
        sort_keys=True,
        separators=(",", ":"),
    )
    return hashlib.sha256(doc.encode("utf-8")).hexdigest()[:12]


def encode_pairs(corpus, subword, max_len):
    """Encode a parallel corpus into (src_ids, tgt_ids) arrays.

    Target rows carry sentence markers: [bos] + pieces + [eos]. Overlong
    rows are truncated to fit max_len; pairs empty on either side after
    encoding are dropped.
    """
    bos, eos = subword.bos_id, subword.eos_id
    out = []
    for src_line, tgt_line in corpus.pairs():
        src = list(encode(subword, src_line).ids)[:max_len]
        core = list(encode(subword, tgt_line).ids)[: max_len - 2]
        if not src or not core:
            continue
        tgt = [bos] + core + [eos]
        out.append((np.asarray(src, dtype=np.int64), np.asarray(tgt, dtype=np.int64)))
    return out


def bucket_batches(pairs, batch_tokens, seed=None, epoch=0):
    """Group pairs into batches of at most batch_tokens padded tokens.

    Pairs are shuffled (when a seed is given), then stably sorted by
    combined length so each batch pads little. Cost counts both sides at
    the batch's padded widths. A lone overlong pair still forms a batch.
    """
    order = list(range(len(pairs)))
    if seed is not None:
        random.Random("%d|%d" % (seed, epoch)).shuffle(order)
    order.sort(key=lambda i: len(pairs[i][0]) + len(pairs[i][1]))
    batches = []
    current = []
    wide_s = wide_t = 0
    for i in order:
        s, t = len(pairs[i][0]), len(pairs[i][1])
        ns, nt = max(wide_s, s), max(wide_t, t)
        if current and (len(current) + 1) * (ns + nt) > batch_tokens:
            batches.append(current)
            current, ns, nt = [], s, t
        current.append(i)
        wide_s, wide_t = ns, nt
    if current:
        batches.append(current)
    return [[pairs[i] for i in b] for b in batches]


def assemble_batch(batch):
    """Pad a batch into (src, tgt_in, tgt_out) id matrices.

    tgt_in drops the final eos, tgt_out drops the leading bos; padding
    positions in tgt_out are excluded from the loss downstream.
    """
    n = len(batch)
    s_width = max(len(s) for s, _ in batch)
    t_width = max(len(t) for _, t in batch) - 1
    src = np.full((n, s_width), PAD_ID, dtype=np.int64)
    tgt_in = np.full((n, t_width), PAD_ID, dtype=np.int64)
    tgt_out = np.full((n, t_width), PAD_ID, dtype=np.int64)
    for i, (s, t) in enumerate(batch):
        src[i, : len(s)] = s
        tgt_in[i, : len(t) - 1] = t[:-1]
        tgt_out[i, : len(t) - 1] = t[1:]
    return src, tgt_in, tgt_out


def _gold_loglik(flat_logits, gold):
    # float64 log-softmax picks, summed over non-pad positions
    mask = gold != PAD_ID
    if not mask.any():
        return 0.0
    x = flat_logits[mask].astype(np.float64)
    g = gold[mask]
    m = x.max(axis=1, keepdims=True)
    lse = m[:, 0] + np.log(np.exp(x - m).sum(axis=1))
    return float((x[np.arange(len(g)), g] - lse).sum())


def compute_mle_objective(model, batch, train=False, rng=None):
    """Loss and likelihood for one batch of (src_ids, tgt_ids) pairs.

    Returns (loss, log_likelihood, n_tokens): loss is the label-smoothed
    negative log-likelihood averaged per non-pad target token, kept on
    the tape; log_likelihood is the unsmoothed sum over those tokens.
    """
    if not batch:
        raise ConfigError("cannot compute an objective for an empty batch")
    src, tgt_in, tgt_out = assemble_batch(batch)
    logits = model.batch_logits(src, tgt_in, train=train, rng=rng)
    n, width, vocab = logits.data.shape
    flat = ad.reshape(logits, (n * width, vocab))
    gold = tgt_out.reshape(-1)
    loss = ad.cross_entropy_smoothed(flat, gold, model.config.label_smoothing, PAD_ID)
    loglik = _gold_loglik(flat.data, gold)
    n_tokens = int((gold != PAD_ID).sum())
    return loss, loglik, n_tokens


def _evaluate_pairs(model, pairs, batch_tokens=EVAL_BATCH_TOKENS):
    total = 0
    correct = 0
    nll = 0.0
    for batch in bucket_batches(pairs, batch_tokens):
        src, tgt_in, tgt_out = assemble_batch(batch)
        with ad.no_grad():
            logits = model.batch_logits(src, tgt_in)
        n, width, vocab = logits.data.shape
        flat = logits.data.reshape(n * width, vocab)
        gold = tgt_out.reshape(-1)
        mask = gold != PAD_ID
        picks = flat.argmax(axis=1)
        correct += int((picks[mask] == gold[mask]).sum())
        total += int(mask.sum())
        nll -= _gold_loglik(flat, gold)
    xent = nll / total
    return correct / total, math.exp(xent), xent


def evaluate_validation(model, valid, subword, batch_tokens=EVAL_BATCH_TOKENS):
    """Teacher-forced validation: (token accuracy, perplexity).

    Accuracy counts argmax hits over non-pad target positions;
    perplexity exponentiates the unsmoothed per-token negative
    log-likelihood.
    """
    pairs = encode_pairs(valid, subword, model.config.max_len)
    if not pairs:
        raise ConfigError("validation split is empty")
    accuracy, perplexity, _ = _evaluate_pairs(model, pairs, batch_tokens)
    return accuracy, perplexity


def _send_notification(summary, notify):
    payload = json.dumps(summary, sort_keys=True)
    if notify.startswith("http://") or notify.startswith("https://"):
        req = urllib.request.Request(
            notify,
            data=payload.encode("utf-8"),
            headers={"Content-Type": "application/json"},
            method="POST",
        )
        with urllib.request.urlopen(req, timeout=10):
            pass
    else:
        with open(notify, "a", encoding="utf-8") as fh:
            fh.write(payload + "\n")


def run_training(splits, subword, config, optimizer, out_dir, policy=None,
                 seed=1, clock=None, notify=None, on_record=None):
    """Train a model on splits.train, validating on splits.valid.

    Stops at optimizer.max_steps or once accuracy fails to improve for
    policy.patience consecutive validations. The best checkpoint by
    validation accuracy is kept under out_dir, telemetry is appended to
    out_dir/telemetry.jsonl one JSON record per validation, and a
    completion event goes to `notify` (a file path to append to, or an
    http(s) URL to POST to). `clock` is a zero-argument seconds source;
    pass a deterministic one to make telemetry reproducible. `on_record`
    is called with each telemetry record as it is written.
    """
    policy = (policy or EarlyStopPolicy()).validate()
    optimizer.validate()
    vocab = len(subword.vocab)
    if config.vocab_size == 0:
        config = replace(config, vocab_size=vocab)
    elif config.vocab_size != vocab:
        raise ConfigError(
            "config says vocab_size=%d but the subword model has %d pieces"
            % (config.vocab_size, vocab))
    config.validate()

    train_pairs = encode_pairs(splits.train, subword, config.max_len)
    valid_pairs = encode_pairs(splits.valid, subword, config.max_len)
    if not train_pairs:
        raise ConfigError("training split is empty")
    if not valid_pairs:
        raise ConfigError("validation split is empty")

    clock = clock or time.monotonic
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    run_id = derive_run_id(config, optimizer, policy, seed)
    fingerprint = subword_fingerprint(subword)

    params = init_parameters(config, seed)
    model = Model(config=config, params=params)
    adam = AdamState() if optimizer.kind == "adam" else None
    averager = ParameterAverage(params, optimizer.average_decay)
    drop_rng = np.random.default_rng(seed)
    tracker = EarlyStopTracker(policy.patience)

    run = TrainingRun(run_id=run_id, config=config, optimizer=optimizer,
                      seed=seed, out_dir=out_dir)
    run.telemetry_path = out_dir / TELEMETRY_FILE

    step = 0
    epoch = 0
    stop = None
    started = clock()
    telemetry = run.telemetry_path.open("a", encoding="utf-8")
    try:
        while stop is None:
            for batch in bucket_batches(train_pairs, optimizer.batch_tokens, seed, epoch):
                step += 1
                loss, _, _ = compute_mle_objective(model, batch, train=True, rng=drop_rng)
                loss_value = float(loss.data)
                if not math.isfinite(loss_value):
                    raise DivergenceError("non-finite loss at step %d" % step)
                ad.backward(loss)
                if adam is not None:
                    adam_update(params, adam, optimizer, config.model_dim, step)
                else:
                    sgd_update(params, effective_rate(optimizer, config.model_dim, step))
                averager.update(params)

                if step % optimizer.valid_every == 0 or step >= optimizer.max_steps:
                    acc, ppl, xent = _evaluate_pairs(model, valid_pairs, optimizer.batch_tokens)
                    record = {
                        "step": step,
                        "lr": effective_rate(optimizer, config.model_dim, step),
                        "xent": xent,
                        "acc": acc,
                        "ppl": ppl,
                        "elapsed_s": clock() - started,
                    }
                    telemetry.write(json.dumps(record) + "\n")
                    telemetry.flush()
                    run.records.append(record)
                    if on_record is not None:
                        on_record(record)
                    if tracker.observe(acc):
                        run.best_step = step
                        run.checkpoint_path = save_checkpoint(
                            out_dir, params, averager.value_dict(), config, step,
                            {"acc": acc, "ppl": ppl, "xent": xent},
                            fingerprint=fingerprint, run_id=run_id)
                    if tracker.should_stop:
                        stop = "early_stop"
                if stop is None and step >= optimizer.max_steps:
                    stop = "max_steps"
                if stop is not None:
                    break
            epoch += 1
    finally:
        telemetry.close()

    run.steps_completed = step
    run.stopped = stop
    run.best_accuracy = tracker.best
    run.wall_hours = (clock() - started) / 3600.0
    if notify:
        try:
            _send_notification(run.summary(), notify)
        except Exception as exc:
            run.notify_error = str(exc)
    return run
