"""Optimizers, the training loop, checkpoints, and green accounting."""

import json
import math
from types import SimpleNamespace

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from nmtforge import autodiff as ad
from nmtforge import trainer as tr
from nmtforge.checkpoint import load_checkpoint, load_model, read_manifest, save_checkpoint
from nmtforge.corpus import DatasetSplits, ParallelCorpus
from nmtforge.errors import ConfigError, DivergenceError, IntegrityError, StateError
from nmtforge.green import generate_green_report, green_report, write_green_report
from nmtforge.models import Model, ModelConfig, build_model, sequence_log_prob
from nmtforge.models.common import BOS_ID, EOS_ID, PAD_ID
from nmtforge.optim import (AdamState, OptimizerConfig, ParameterAverage,
                            adam_update, effective_rate, sgd_update)
from nmtforge.subword import save_subword_model, subword_fingerprint, train_bpe

# ---------------------------------------------------------------------------
# oracles


def gold_loglik_oracle(flat_logits, gold, pad_id):
    """Per-row float64 softmax, summed one token at a time."""
    total = 0.0
    for i, g in enumerate(gold):
        if g == pad_id:
            continue
        row = flat_logits[i].astype(np.float64)
        probs = np.exp(row - row.max())
        probs /= probs.sum()
        total += math.log(probs[g])
    return total


def adam_one_step_oracle(theta, grad, config, model_dim, step):
    """Textbook Adam with bias correction, in float64."""
    lr = config.learning_rate * min(step ** -0.5, step * config.warmup_steps ** -1.5) * model_dim ** -0.5
    m = (1.0 - config.beta1) * grad
    v = (1.0 - config.beta2) * grad * grad
    m_hat = m / (1.0 - config.beta1 ** step)
    v_hat = v / (1.0 - config.beta2 ** step)
    return theta - lr * m_hat / (np.sqrt(v_hat) + config.eps)


# ---------------------------------------------------------------------------
# fixtures

TINY = ModelConfig(architecture="transformer", layers=1, heads=2, model_dim=8,
                   ff_dim=16, dropout=0.0, attention_dropout=0.0,
                   label_smoothing=0.1, vocab_size=11, max_len=32)


def f64_params(params):
    for _, t in params.items():
        t.data = t.data.astype(np.float64)
        t.grad = np.zeros_like(t.data)
    return params


def single_param(value, dtype=np.float64):
    p = ad.ParameterSet()
    p.add("w", np.asarray(value, dtype=dtype))
    return p


def copy_corpus(n=60, seed=0):
    import random as _random

    rng = _random.Random(seed)
    lines = ["".join(rng.choice("abcde") for _ in range(rng.randint(3, 6))) for _ in range(n)]
    return ParallelCorpus(tuple(lines), tuple(lines), name="copy")


def copy_setup(n=60, seed=0):
    corpus = copy_corpus(n, seed)
    k = n // 6
    splits = DatasetSplits(
        train=ParallelCorpus(corpus.source_lines[2 * k:], corpus.target_lines[2 * k:], "copy.train"),
        valid=ParallelCorpus(corpus.source_lines[:k], corpus.target_lines[:k], "copy.valid"),
        test=ParallelCorpus(corpus.source_lines[k:2 * k], corpus.target_lines[k:2 * k], "copy.test"),
        ratio=(0.67, 0.165, 0.165),
    )
    subword = train_bpe(list(corpus.source_lines) + list(corpus.target_lines), 14)
    return splits, subword


def tiny_optimizer(**kw):
    base = dict(kind="adam", max_steps=12, valid_every=5, batch_tokens=256,
                warmup_steps=8000, average_decay=0.0)
    base.update(kw)
    return OptimizerConfig(**base)


class FakeClock:
    def __init__(self, tick=1.0):
        self.now = 0.0
        self.tick = tick

    def __call__(self):
        self.now += self.tick
        return self.now


# ---------------------------------------------------------------------------
# learning-rate schedule


def test_defaults_match_the_published_recipe():
    cfg = OptimizerConfig()
    assert cfg.kind == "adam"
    assert cfg.learning_rate == 2.0
    assert cfg.warmup_steps == 8000
    assert (cfg.beta1, cfg.beta2, cfg.eps) == (0.9, 0.998, 1e-9)
    assert cfg.average_decay == 0.0001
    assert cfg.batch_tokens == 2048
    assert cfg.max_steps == 40000
    assert cfg.valid_every == 500
    assert tr.EarlyStopPolicy().patience == 4


def test_rate_peaks_exactly_at_warmup():
    cfg = OptimizerConfig(warmup_steps=50)
    rates = [effective_rate(cfg, 64, s) for s in range(1, 201)]
    assert rates.index(max(rates)) + 1 == 50
    assert rates[48] < rates[49] > rates[50]


def test_rate_grows_linearly_during_warmup():
    cfg = OptimizerConfig(warmup_steps=100)
    r10 = effective_rate(cfg, 64, 10)
    r20 = effective_rate(cfg, 64, 20)
    assert r20 == pytest.approx(2 * r10, rel=1e-12)


def test_rate_decays_as_inverse_sqrt_after_warmup():
    cfg = OptimizerConfig(warmup_steps=10)
    r = effective_rate(cfg, 64, 400)
    assert r == pytest.approx(cfg.learning_rate * 400 ** -0.5 * 64 ** -0.5, rel=1e-12)


def test_rate_rejects_step_zero():
    with pytest.raises(StateError):
        effective_rate(OptimizerConfig(), 64, 0)


def test_optimizer_config_validation():
    with pytest.raises(ConfigError):
        OptimizerConfig(kind="rmsprop").validate()
    with pytest.raises(ConfigError):
        OptimizerConfig(learning_rate=0.0).validate()
    with pytest.raises(ConfigError):
        OptimizerConfig(beta2=1.0).validate()
    with pytest.raises(ConfigError):
        OptimizerConfig(valid_every=0).validate()
    with pytest.raises(ConfigError):
        tr.EarlyStopPolicy(patience=0).validate()


# ---------------------------------------------------------------------------
# sgd


def test_sgd_single_step_arithmetic():
    p = single_param([1.0])
    p["w"].grad[:] = 0.5
    sgd_update(p, 0.1)
    assert p["w"].data[0] == pytest.approx(0.95, abs=1e-12)


def test_sgd_is_exact_on_dyadic_values():
    p = single_param([1.5, -2.0])
    p["w"].grad[:] = [0.25, -0.5]
    sgd_update(p, 0.5)
    assert p["w"].data.tolist() == [1.375, -1.75]


def test_sgd_zero_gradient_is_a_fixed_point():
    p = single_param([3.0, -1.0])
    sgd_update(p, 0.7)
    assert p["w"].data.tolist() == [3.0, -1.0]


def test_sgd_clears_gradients():
    p = single_param([1.0])
    p["w"].grad[:] = 2.0
    sgd_update(p, 0.1)
    assert p["w"].grad[0] == 0.0


def test_sgd_elementwise_matches_formula():
    rng = np.random.default_rng(5)
    theta = rng.normal(size=(4, 3))
    grad = rng.normal(size=(4, 3))
    p = single_param(theta.copy())
    p["w"].grad[:] = grad
    sgd_update(p, 0.37)
    np.testing.assert_array_equal(p["w"].data, theta - 0.37 * grad)


def test_sgd_requires_gradient_buffers():
    p = ad.ParameterSet()
    p.add("w", np.ones(2, dtype=np.float32))
    p["w"].grad = None
    with pytest.raises(StateError):
        sgd_update(p, 0.1)


# ---------------------------------------------------------------------------
# adam


def test_adam_first_step_has_unit_corrected_moments():
    cfg = OptimizerConfig()
    p = single_param([0.0])
    p["w"].grad[:] = 1.0
    adam_update(p, AdamState(), cfg, model_dim=4, step=1)
    rate = effective_rate(cfg, 4, 1)
    assert p["w"].data[0] == pytest.approx(-rate / (1.0 + cfg.eps), rel=1e-12)


def test_adam_matches_hand_oracle_across_steps():
    cfg = OptimizerConfig(warmup_steps=4)
    rng = np.random.default_rng(11)
    theta = rng.normal(size=(3,))
    p = single_param(theta.copy())
    state = AdamState()
    m = np.zeros(3)
    v = np.zeros(3)
    for step in range(1, 6):
        g = rng.normal(size=(3,))
        p["w"].grad[:] = g
        adam_update(p, state, cfg, model_dim=16, step=step)
        lr = effective_rate(cfg, 16, step)
        m = cfg.beta1 * m + (1 - cfg.beta1) * g
        v = cfg.beta2 * v + (1 - cfg.beta2) * g * g
        theta = theta - lr * (m / (1 - cfg.beta1 ** step)) / (np.sqrt(v / (1 - cfg.beta2 ** step)) + cfg.eps)
        np.testing.assert_allclose(p["w"].data, theta, rtol=1e-12)


def test_adam_one_step_oracle_agrees():
    cfg = OptimizerConfig(warmup_steps=7)
    p = single_param([0.3, -1.2])
    p["w"].grad[:] = [0.9, -0.4]
    adam_update(p, AdamState(), cfg, model_dim=8, step=1)
    want = adam_one_step_oracle(np.array([0.3, -1.2]), np.array([0.9, -0.4]), cfg, 8, 1)
    np.testing.assert_allclose(p["w"].data, want, rtol=1e-12)


def test_adam_zero_gradients_leave_parameters_untouched():
    cfg = OptimizerConfig()
    p = single_param([1.0, 2.0, 3.0])
    state = AdamState()
    for step in range(1, 5):
        adam_update(p, state, cfg, model_dim=4, step=step)
    assert p["w"].data.tolist() == [1.0, 2.0, 3.0]


def test_adam_clears_gradients_after_update():
    p = single_param([0.0])
    p["w"].grad[:] = 1.0
    adam_update(p, AdamState(), OptimizerConfig(), 4, 1)
    assert p["w"].grad[0] == 0.0


# ---------------------------------------------------------------------------
# parameter averaging


def test_average_with_zero_decay_tracks_raw_weights():
    p = single_param([1.0, 2.0])
    avg = ParameterAverage(p, 0.0)
    p["w"].data[:] = [5.0, -3.0]
    avg.update(p)
    assert avg.value_dict()["w"].tolist() == [5.0, -3.0]


def test_average_blends_at_the_configured_decay():
    p = single_param([0.0])
    avg = ParameterAverage(p, 0.5)
    p["w"].data[:] = 8.0
    avg.update(p)
    assert avg.value_dict()["w"][0] == 4.0
    avg.update(p)
    assert avg.value_dict()["w"][0] == 6.0


def test_average_is_a_copy_not_a_view():
    p = single_param([1.0])
    avg = ParameterAverage(p, 0.0001)
    p["w"].data[:] = 100.0
    assert avg.value_dict()["w"][0] == 1.0


def test_average_rejects_bad_decay():
    with pytest.raises(ConfigError):
        ParameterAverage(single_param([1.0]), 1.5)


# ---------------------------------------------------------------------------
# batching


def test_assemble_batch_pads_and_shifts():
    batch = [
        (np.array([4, 5, 6]), np.array([BOS_ID, 7, 8, EOS_ID])),
        (np.array([9]), np.array([BOS_ID, 10, EOS_ID])),
    ]
    src, tgt_in, tgt_out = tr.assemble_batch(batch)
    assert src.tolist() == [[4, 5, 6], [9, PAD_ID, PAD_ID]]
    assert tgt_in.tolist() == [[BOS_ID, 7, 8], [BOS_ID, 10, PAD_ID]]
    assert tgt_out.tolist() == [[7, 8, EOS_ID], [10, EOS_ID, PAD_ID]]


@given(st.lists(st.tuples(st.integers(1, 9), st.integers(2, 9)), min_size=1, max_size=40),
       st.integers(0, 3))
@settings(max_examples=60, deadline=None)
def test_bucketing_partitions_the_pairs(lengths, epoch):
    pairs = [(np.full(s, 4), np.full(t, 5)) for s, t in lengths]
    batches = tr.bucket_batches(pairs, 40, seed=9, epoch=epoch)
    seen = [id(p) for b in batches for p in b]
    assert sorted(seen) == sorted(id(p) for p in pairs)
    for b in batches:
        if len(b) > 1:
            cost = len(b) * (max(len(p[0]) for p in b) + max(len(p[1]) for p in b))
            assert cost <= 40


def test_bucketing_is_deterministic_per_seed_and_epoch():
    pairs = [(np.full(s, 4), np.full(s + 1, 5)) for s in range(1, 30)]
    a = tr.bucket_batches(pairs, 64, seed=3, epoch=2)
    b = tr.bucket_batches(pairs, 64, seed=3, epoch=2)
    assert [[len(p[0]) for p in batch] for batch in a] == [[len(p[0]) for p in batch] for batch in b]


def test_encode_pairs_adds_markers_and_truncates():
    splits, subword = copy_setup()
    pairs = tr.encode_pairs(splits.train, subword, max_len=32)
    assert pairs
    for src, tgt in pairs:
        assert tgt[0] == BOS_ID and tgt[-1] == EOS_ID
        assert len(src) <= 32 and len(tgt) <= 32
    long_corpus = ParallelCorpus(("ab " * 50,), ("ab " * 50,), "long")
    (src, tgt), = tr.encode_pairs(long_corpus, subword, max_len=10)
    assert len(src) == 10 and len(tgt) == 10


# ---------------------------------------------------------------------------
# the objective


def uniform_model(vocab, smoothing=0.1):
    def batch_logits(src, tgt_in, train=False, rng=None):
        n, width = tgt_in.shape
        return ad.Tensor(np.zeros((n, width, vocab), dtype=np.float32))

    return SimpleNamespace(config=SimpleNamespace(label_smoothing=smoothing, vocab_size=vocab),
                           batch_logits=batch_logits)


def test_uniform_model_loss_is_log_vocab():
    batch = [(np.array([4, 5]), np.array([BOS_ID, 6, 7, EOS_ID]))]
    loss, loglik, n_tokens = tr.compute_mle_objective(uniform_model(8), batch)
    assert float(loss.data) == pytest.approx(math.log(8), rel=1e-6)
    assert n_tokens == 3
    assert loglik == pytest.approx(-3 * math.log(8), rel=1e-6)


def test_duplicating_a_pair_leaves_the_mean_loss_alone():
    model = build_model(TINY, seed=4)
    pair = (np.array([4, 5, 6]), np.array([BOS_ID, 7, 8, EOS_ID]))
    one, _, _ = tr.compute_mle_objective(model, [pair])
    two, _, _ = tr.compute_mle_objective(model, [pair, pair])
    assert float(one.data) == pytest.approx(float(two.data), rel=1e-6)


def test_batch_loglik_matches_per_pair_scoring():
    model = build_model(TINY, seed=9)
    pairs = [
        (np.array([4, 5, 6]), np.array([BOS_ID, 7, 8, EOS_ID])),
        (np.array([4, 6]), np.array([BOS_ID, 9, EOS_ID])),
    ]
    _, loglik, _ = tr.compute_mle_objective(model, pairs)
    separate = sum(sequence_log_prob(model, s, t) for s, t in pairs)
    assert loglik == pytest.approx(separate, abs=1e-5)


def test_loglik_agrees_with_float64_oracle():
    rng = np.random.default_rng(3)
    flat = rng.normal(size=(7, 5)).astype(np.float32)
    gold = np.array([0, 4, PAD_ID, 2, 1, PAD_ID, 4])
    assert tr._gold_loglik(flat, gold) == pytest.approx(
        gold_loglik_oracle(flat, gold, PAD_ID), abs=1e-6)


def test_empty_batch_is_a_config_error():
    with pytest.raises(ConfigError):
        tr.compute_mle_objective(uniform_model(8), [])


# ---------------------------------------------------------------------------
# validation


def test_perfect_model_scores_full_accuracy_and_unit_perplexity():
    tgt = np.array([BOS_ID, 5, 6, 7, EOS_ID])

    def batch_logits(src, tgt_in, train=False, rng=None):
        n, width = tgt_in.shape
        logits = np.zeros((n, width, 9), dtype=np.float32)
        for j in range(width):
            logits[:, j, tgt[j + 1]] = 1000.0
        return ad.Tensor(logits)

    model = SimpleNamespace(config=SimpleNamespace(label_smoothing=0.0), batch_logits=batch_logits)
    acc, ppl, xent = tr._evaluate_pairs(model, [(np.array([4]), tgt)])
    assert acc == 1.0
    assert ppl == 1.0
    assert xent == 0.0


def test_uniform_model_perplexity_equals_vocab_size():
    pairs = [(np.array([4]), np.array([BOS_ID, 5, 6, EOS_ID]))]
    acc, ppl, _ = tr._evaluate_pairs(uniform_model(8), pairs)
    assert ppl == pytest.approx(8.0, rel=1e-9)


def test_perplexity_matches_independent_per_token_summation():
    splits, subword = copy_setup()
    config = ModelConfig(architecture="transformer", layers=1, heads=2, model_dim=8,
                         ff_dim=16, dropout=0.0, attention_dropout=0.0,
                         label_smoothing=0.1, vocab_size=len(subword.vocab), max_len=32)
    model = build_model(config, seed=2)
    three = ParallelCorpus(splits.valid.source_lines[:3], splits.valid.target_lines[:3], "v3")
    acc, ppl = tr.evaluate_validation(model, three, subword)

    total = 0.0
    count = 0
    for src, tgt in tr.encode_pairs(three, subword, config.max_len):
        with ad.no_grad():
            logits = model.batch_logits(src[None, :], tgt[None, :-1])
        for j in range(len(tgt) - 1):
            row = logits.data[0, j].astype(np.float64)
            probs = np.exp(row - row.max())
            probs /= probs.sum()
            total -= math.log(probs[tgt[j + 1]])
            count += 1
    assert ppl == pytest.approx(math.exp(total / count), abs=1e-5)
    assert 0.0 <= acc <= 1.0


def test_empty_validation_split_is_a_config_error():
    splits, subword = copy_setup()
    config = ModelConfig(vocab_size=len(subword.vocab))
    model = SimpleNamespace(config=config, batch_logits=None)
    empty = ParallelCorpus((), (), "empty")
    with pytest.raises(ConfigError):
        tr.evaluate_validation(model, empty, subword)


# ---------------------------------------------------------------------------
# early stopping


def test_tracker_stops_after_patience_non_improving():
    t = tr.EarlyStopTracker(patience=4)
    improved = [t.observe(a) for a in [10, 11, 10, 10, 10, 10]]
    assert improved == [True, True, False, False, False, False]
    assert t.should_stop
    assert t.best == 11
    assert t.best_index == 2


def test_tracker_improvement_resets_the_streak():
    t = tr.EarlyStopTracker(patience=2)
    for a in [1.0, 0.9, 1.5]:
        t.observe(a)
    assert not t.should_stop
    assert t.streak == 0


def test_tracker_ties_count_against_patience():
    t = tr.EarlyStopTracker(patience=3)
    for a in [5.0, 5.0, 5.0, 5.0]:
        t.observe(a)
    assert t.should_stop


# ---------------------------------------------------------------------------
# run_training


def scripted_eval(monkeypatch, accs):
    queue = list(accs)
    calls = []

    def fake(model, pairs, batch_tokens=2048):
        acc = queue.pop(0) if queue else 0.0
        calls.append(acc)
        return acc, 1.0, 0.0

    monkeypatch.setattr(tr, "_evaluate_pairs", fake)
    return calls


def test_early_stop_fires_after_exactly_patience_validations(monkeypatch, tmp_path):
    calls = scripted_eval(monkeypatch, [0.10, 0.11, 0.10, 0.10, 0.10, 0.10])
    splits, subword = copy_setup()
    run = tr.run_training(splits, subword, ModelConfig(layers=1, heads=2, model_dim=8,
                                                       ff_dim=16, dropout=0.0, attention_dropout=0.0,
                                                       max_len=32),
                          tiny_optimizer(max_steps=500, valid_every=1),
                          tmp_path, policy=tr.EarlyStopPolicy(patience=4), seed=1)
    assert len(calls) == 6
    assert run.stopped == "early_stop"
    assert run.steps_completed == 6
    assert run.best_accuracy == 0.11
    assert run.best_step == 2
    assert read_manifest(tmp_path)["step"] == 2


def test_short_run_gets_exactly_one_final_validation(monkeypatch, tmp_path):
    calls = scripted_eval(monkeypatch, [0.5])
    splits, subword = copy_setup()
    run = tr.run_training(splits, subword, ModelConfig(layers=1, heads=2, model_dim=8,
                                                       ff_dim=16, dropout=0.0, attention_dropout=0.0,
                                                       max_len=32),
                          tiny_optimizer(max_steps=7, valid_every=1000),
                          tmp_path, seed=1)
    assert len(calls) == 1
    assert run.stopped == "max_steps"
    assert run.steps_completed == 7
    assert run.records[0]["step"] == 7


def test_training_writes_telemetry_and_best_checkpoint(tmp_path):
    splits, subword = copy_setup()
    run = tr.run_training(splits, subword,
                          ModelConfig(layers=1, heads=2, model_dim=16, ff_dim=32,
                                      dropout=0.0, attention_dropout=0.0, max_len=32),
                          tiny_optimizer(), tmp_path, seed=7, clock=FakeClock())
    assert run.stopped == "max_steps"
    assert run.steps_completed == 12
    lines = run.telemetry_path.read_text().splitlines()
    assert len(lines) == 3 == len(run.records)
    steps = [json.loads(l)["step"] for l in lines]
    assert steps == [5, 10, 12]
    for line in lines:
        record = json.loads(line)
        assert list(record) == ["step", "lr", "xent", "acc", "ppl", "elapsed_s"]
        assert record["ppl"] == pytest.approx(math.exp(record["xent"]), rel=1e-9)
    manifest = read_manifest(tmp_path)
    assert manifest["run_id"] == run.run_id
    assert manifest["subword_fingerprint"] == subword_fingerprint(subword)


def test_same_seed_runs_are_byte_identical(tmp_path):
    splits, subword = copy_setup()
    config = ModelConfig(layers=1, heads=2, model_dim=16, ff_dim=32,
                         dropout=0.1, attention_dropout=0.1, max_len=32)
    outs = []
    for name in ("a", "b"):
        out = tmp_path / name
        tr.run_training(splits, subword, config, tiny_optimizer(average_decay=0.0001),
                        out, seed=5, clock=FakeClock())
        outs.append(out)
    a, b = outs
    for rel in ("telemetry.jsonl", "checkpoint/manifest.json",
                "checkpoint/params.bin", "checkpoint/average.bin"):
        assert (a / rel).read_bytes() == (b / rel).read_bytes(), rel


def test_different_seeds_diverge(tmp_path):
    splits, subword = copy_setup()
    config = ModelConfig(layers=1, heads=2, model_dim=16, ff_dim=32,
                         dropout=0.0, attention_dropout=0.0, max_len=32)
    tr.run_training(splits, subword, config, tiny_optimizer(max_steps=5, valid_every=5),
                    tmp_path / "a", seed=1, clock=FakeClock())
    tr.run_training(splits, subword, config, tiny_optimizer(max_steps=5, valid_every=5),
                    tmp_path / "b", seed=2, clock=FakeClock())
    assert (tmp_path / "a/checkpoint/params.bin").read_bytes() != \
        (tmp_path / "b/checkpoint/params.bin").read_bytes()


def test_run_id_depends_on_config_and_seed():
    cfg = ModelConfig(vocab_size=20)
    opt = OptimizerConfig()
    pol = tr.EarlyStopPolicy()
    a = tr.derive_run_id(cfg, opt, pol, seed=1)
    assert a == tr.derive_run_id(cfg, opt, pol, seed=1)
    assert a != tr.derive_run_id(cfg, opt, pol, seed=2)
    assert a != tr.derive_run_id(ModelConfig(vocab_size=21), opt, pol, seed=1)


def test_empty_training_split_is_a_config_error(tmp_path):
    splits, subword = copy_setup()
    empty = DatasetSplits(train=ParallelCorpus((), (), "e.train"),
                          valid=splits.valid, test=splits.test, ratio=splits.ratio)
    with pytest.raises(ConfigError):
        tr.run_training(empty, subword, ModelConfig(max_len=32), tiny_optimizer(), tmp_path)


def test_vocab_mismatch_is_a_config_error(tmp_path):
    splits, subword = copy_setup()
    config = ModelConfig(vocab_size=len(subword.vocab) + 1, max_len=32)
    with pytest.raises(ConfigError):
        tr.run_training(splits, subword, config, tiny_optimizer(), tmp_path)


def test_divergence_error_names_the_step(monkeypatch, tmp_path):
    real = tr.compute_mle_objective
    state = {"n": 0}

    def poisoned(model, batch, train=False, rng=None):
        state["n"] += 1
        if state["n"] == 3:
            return ad.Tensor(np.float32("nan")), 0.0, 1
        return real(model, batch, train=train, rng=rng)

    monkeypatch.setattr(tr, "compute_mle_objective", poisoned)
    splits, subword = copy_setup()
    with pytest.raises(DivergenceError) as err:
        tr.run_training(splits, subword,
                        ModelConfig(layers=1, heads=2, model_dim=8, ff_dim=16,
                                    dropout=0.0, attention_dropout=0.0, max_len=32),
                        tiny_optimizer(batch_tokens=32), tmp_path, seed=1)
    assert "step 3" in str(err.value)


def test_completion_notification_appends_to_a_file(monkeypatch, tmp_path):
    scripted_eval(monkeypatch, [0.5])
    splits, subword = copy_setup()
    sink = tmp_path / "events.jsonl"
    run = tr.run_training(splits, subword,
                          ModelConfig(layers=1, heads=2, model_dim=8, ff_dim=16,
                                      dropout=0.0, attention_dropout=0.0, max_len=32),
                          tiny_optimizer(max_steps=2, valid_every=10),
                          tmp_path / "run", seed=1, notify=str(sink))
    event = json.loads(sink.read_text().splitlines()[0])
    assert event["event"] == "training_complete"
    assert event["run_id"] == run.run_id
    assert run.notify_error is None


def test_unreachable_notification_url_does_not_fail_the_run(monkeypatch, tmp_path):
    scripted_eval(monkeypatch, [0.5])
    splits, subword = copy_setup()
    run = tr.run_training(splits, subword,
                          ModelConfig(layers=1, heads=2, model_dim=8, ff_dim=16,
                                      dropout=0.0, attention_dropout=0.0, max_len=32),
                          tiny_optimizer(max_steps=2, valid_every=10),
                          tmp_path / "run", seed=1, notify="http://127.0.0.1:9/down")
    assert run.notify_error


# ---------------------------------------------------------------------------
# checkpoints


def small_params(seed=0):
    rng = np.random.default_rng(seed)
    p = ad.ParameterSet()
    p.add("a", rng.normal(size=(3, 4)).astype(np.float32))
    p.add("b", rng.normal(size=(2,)).astype(np.float32))
    return p


def test_checkpoint_round_trip_is_bit_exact(tmp_path):
    p = small_params()
    avg = {n: v + 1.0 for n, v in p.value_dict().items()}
    save_checkpoint(tmp_path, p, avg, TINY, 42, {"acc": 0.5}, fingerprint=None, run_id="r")
    raw, config, manifest = load_checkpoint(tmp_path, prefer_average=False)
    smooth, _, _ = load_checkpoint(tmp_path, prefer_average=True)
    assert manifest["step"] == 42
    assert config.to_dict() == TINY.to_dict()
    for name, value in p.value_dict().items():
        np.testing.assert_array_equal(raw[name], value)
        np.testing.assert_array_equal(smooth[name], avg[name])


def test_save_load_save_produces_identical_bytes(tmp_path):
    p = small_params(3)
    avg = p.value_dict()
    save_checkpoint(tmp_path / "one", p, avg, TINY, 7, {"acc": 0.25}, run_id="x")
    values, config, manifest = load_checkpoint(tmp_path / "one", prefer_average=False)
    save_checkpoint(tmp_path / "two", values, values, config, manifest["step"],
                    manifest["metrics"], fingerprint=manifest["subword_fingerprint"],
                    run_id=manifest["run_id"])
    for rel in ("checkpoint/manifest.json", "checkpoint/params.bin"):
        assert (tmp_path / "one" / rel).read_bytes() == (tmp_path / "two" / rel).read_bytes()


def test_truncated_blob_is_an_integrity_error(tmp_path):
    p = small_params()
    save_checkpoint(tmp_path, p, p.value_dict(), TINY, 1, {})
    blob = tmp_path / "checkpoint/params.bin"
    blob.write_bytes(blob.read_bytes()[:-5])
    with pytest.raises(IntegrityError):
        load_checkpoint(tmp_path, prefer_average=False)


def test_mangled_manifest_is_an_integrity_error(tmp_path):
    p = small_params()
    save_checkpoint(tmp_path, p, p.value_dict(), TINY, 1, {})
    path = tmp_path / "checkpoint/manifest.json"
    path.write_text("{not json")
    with pytest.raises(IntegrityError):
        read_manifest(tmp_path)
    doc = {"version": 1, "config": TINY.to_dict(), "step": 1, "params": {}}
    path.write_text(json.dumps(doc))
    with pytest.raises(IntegrityError):
        read_manifest(tmp_path)


def test_missing_checkpoint_is_an_integrity_error(tmp_path):
    with pytest.raises(IntegrityError):
        load_checkpoint(tmp_path)


def test_mismatched_average_names_are_rejected(tmp_path):
    p = small_params()
    with pytest.raises(IntegrityError):
        save_checkpoint(tmp_path, p, {"a": p["a"].data}, TINY, 1, {})


def test_load_model_rebuilds_a_runnable_model(tmp_path):
    splits, subword = copy_setup()
    config = ModelConfig(layers=1, heads=2, model_dim=8, ff_dim=16,
                         dropout=0.0, attention_dropout=0.0,
                         vocab_size=len(subword.vocab), max_len=32)
    model = build_model(config, seed=6)
    save_subword_model(subword, tmp_path / "subword.json")
    save_checkpoint(tmp_path, model.params, model.params.value_dict(), config, 9,
                    {"acc": 1.0}, fingerprint=subword_fingerprint(subword))
    loaded, loaded_subword, manifest = load_model(tmp_path)
    assert manifest["step"] == 9
    assert loaded_subword.vocab == subword.vocab
    src = np.array([4, 5])
    tgt = np.array([BOS_ID, 6, EOS_ID])
    assert sequence_log_prob(loaded, src, tgt) == pytest.approx(
        sequence_log_prob(model, src, tgt), abs=1e-6)


def test_load_model_checks_the_vocabulary_fingerprint(tmp_path):
    splits, subword = copy_setup()
    config = ModelConfig(layers=1, heads=2, model_dim=8, ff_dim=16,
                         dropout=0.0, attention_dropout=0.0,
                         vocab_size=len(subword.vocab), max_len=32)
    model = build_model(config, seed=6)
    save_subword_model(subword, tmp_path / "subword.json")
    save_checkpoint(tmp_path, model.params, model.params.value_dict(), config, 1,
                    {}, fingerprint="0" * 64)
    with pytest.raises(IntegrityError):
        load_model(tmp_path)


# ---------------------------------------------------------------------------
# green report


def test_worked_green_figures_are_exact():
    report = green_report(hours=10.0, watts=300.0, factor_g_per_kwh=324.0)
    assert report.kwh == 3.0
    assert report.kgco2 == 0.972


def test_long_run_green_figures():
    report = green_report(hours=95.3, watts=320.0, factor_g_per_kwh=324.0)
    assert report.kgco2 == pytest.approx(9.88, abs=0.01)
    assert report.kgco2 == 95.3 * 320.0 * 324.0 / 1e6


def test_zero_hours_zero_emissions():
    report = green_report(hours=0.0, watts=250.0)
    assert report.kwh == 0.0
    assert report.kgco2 == 0.0


def test_green_arithmetic_identity_holds():
    for hours, watts, factor in [(1.5, 280.0, 295.0), (72.25, 350.0, 324.0)]:
        report = green_report(hours, watts, factor)
        assert report.kgco2 == watts * hours * factor / 1e6


def test_green_rejects_bad_inputs():
    with pytest.raises(ConfigError):
        green_report(hours=1.0, watts=0.0)
    with pytest.raises(ConfigError):
        green_report(hours=-1.0, watts=300.0)
    with pytest.raises(ConfigError):
        green_report(hours=1.0, watts=300.0, factor_g_per_kwh=-2.0)


def test_green_report_from_a_training_run():
    run = SimpleNamespace(wall_hours=10.0)
    report = generate_green_report(run, watts=300.0, factor_g_per_kwh=324.0)
    assert report.kgco2 == 0.972


def test_green_report_file_round_trip(tmp_path):
    report = green_report(hours=2.0, watts=300.0, region="IE")
    path = write_green_report(report, tmp_path / "green.json")
    doc = json.loads(path.read_text())
    assert doc == {"watts": 300.0, "hours": 2.0, "kwh": 0.6,
                   "factor_g_per_kwh": 324.0, "kgco2": 0.1944, "region": "IE"}
