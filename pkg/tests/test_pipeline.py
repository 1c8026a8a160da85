"""Whole-pipeline behavior: artifacts, determinism, stage equivalence."""

import json
import random

import pytest

from nmtforge.checkpoint import read_manifest
from nmtforge.config import config_from_dict
from nmtforge.corpus import load_parallel_corpus, read_splits, split_corpus, write_splits
from nmtforge.errors import ConfigError
from nmtforge.pipeline import autobuild, run_pipeline, train_subword
from nmtforge.registry import ModelRegistry
from nmtforge.subword import subword_fingerprint

CHECK_FILES = (
    "telemetry.jsonl",
    "subword.json",
    "checkpoint/manifest.json",
    "checkpoint/params.bin",
    "checkpoint/average.bin",
)


@pytest.fixture(scope="module")
def corpus_files(tmp_path_factory):
    root = tmp_path_factory.mktemp("corpus")
    rng = random.Random(0)
    lines = [" ".join(rng.choice("abcde") for _ in range(rng.randint(3, 6)))
             for _ in range(60)]
    src, tgt = root / "src.txt", root / "tgt.txt"
    src.write_text("".join(line + "\n" for line in lines))
    tgt.write_text("".join(line + "\n" for line in lines))
    return src, tgt


def tiny_doc(src, tgt, out, **extra):
    doc = {
        "source": str(src),
        "target": str(tgt),
        "out_dir": str(out),
        "seed": 3,
        "subword": {"kind": "bpe", "vocab_size": 14},
        "model": {"layers": 1, "heads": 2, "model_dim": 16, "ff_dim": 32, "max_len": 32},
        "optimizer": {"max_steps": 6, "valid_every": 3, "batch_tokens": 256},
    }
    doc.update(extra)
    return doc


def read_bytes(model_dir, names=CHECK_FILES):
    return {name: (model_dir / name).read_bytes() for name in names}


def test_pipeline_writes_the_full_model_directory(corpus_files, tmp_path):
    src, tgt = corpus_files
    result = run_pipeline(config_from_dict(tiny_doc(src, tgt, tmp_path / "runs")))
    d = result.model_dir
    for name in CHECK_FILES + ("green.json", "run.json"):
        assert (d / name).exists(), name
    sizes = [len((d / "data" / ("corpus.%s.src" % part)).read_text().splitlines())
             for part in ("train", "valid", "test")]
    assert sum(sizes) == 60
    assert sizes[0] > sizes[1] and sizes[0] > sizes[2]


def test_default_model_id_comes_from_the_run_id(corpus_files, tmp_path):
    src, tgt = corpus_files
    result = run_pipeline(config_from_dict(tiny_doc(src, tgt, tmp_path / "runs")))
    assert result.model_id == "model-" + result.run.run_id
    assert result.model_dir.name == result.model_id


def test_explicit_name_is_used_verbatim(corpus_files, tmp_path):
    src, tgt = corpus_files
    doc = tiny_doc(src, tgt, tmp_path / "runs", name="demo")
    result = run_pipeline(config_from_dict(doc))
    assert result.model_id == "demo"
    assert result.model_dir == tmp_path / "runs" / "demo"


def test_telemetry_uses_the_frozen_clock_by_default(corpus_files, tmp_path):
    src, tgt = corpus_files
    result = run_pipeline(config_from_dict(tiny_doc(src, tgt, tmp_path / "runs")))
    rows = [json.loads(line) for line in
            (result.model_dir / "telemetry.jsonl").read_text().splitlines()]
    assert rows and all(row["elapsed_s"] == 0.0 for row in rows)
    assert [row["step"] for row in rows] == [3, 6]


def test_same_seed_builds_are_byte_identical(corpus_files, tmp_path):
    src, tgt = corpus_files
    a = run_pipeline(config_from_dict(tiny_doc(src, tgt, tmp_path / "a")))
    b = run_pipeline(config_from_dict(tiny_doc(src, tgt, tmp_path / "b")))
    assert read_bytes(a.model_dir) == read_bytes(b.model_dir)


def test_different_seeds_diverge(corpus_files, tmp_path):
    src, tgt = corpus_files
    a = run_pipeline(config_from_dict(tiny_doc(src, tgt, tmp_path / "a")))
    b = run_pipeline(config_from_dict(tiny_doc(src, tgt, tmp_path / "b", seed=4)))
    assert (a.model_dir / "checkpoint/params.bin").read_bytes() != \
           (b.model_dir / "checkpoint/params.bin").read_bytes()


def test_autobuild_matches_stage_by_stage_build(corpus_files, tmp_path):
    src, tgt = corpus_files
    doc = tiny_doc(src, tgt, tmp_path / "auto")
    auto = autobuild(src, tgt, architecture="transformer",
                     config=config_from_dict(doc), out_dir=tmp_path / "auto")

    # the same thing by hand: split to disk, read back, reuse artifacts
    config = config_from_dict(tiny_doc(src, tgt, tmp_path / "manual"))
    corpus = load_parallel_corpus(src, tgt)
    splits = split_corpus(corpus, config.ratio, config.seed)
    write_splits(splits, tmp_path / "stage_data")
    reloaded = read_splits(tmp_path / "stage_data", "corpus")
    shared = list(reloaded.train.source_lines) + list(reloaded.train.target_lines)
    subword = train_subword(shared, config.subword)
    manual = run_pipeline(config, splits=reloaded, subword=subword)

    assert read_bytes(auto.model_dir) == read_bytes(manual.model_dir)


def test_autobuild_rnn_lands_in_the_manifest(corpus_files, tmp_path):
    src, tgt = corpus_files
    doc = tiny_doc(src, tgt, tmp_path / "runs")
    doc["model"].update({"heads": 1, "model_dim": 8, "ff_dim": 16})
    result = autobuild(src, tgt, architecture="rnn",
                       config=config_from_dict(doc), out_dir=tmp_path / "runs")
    manifest = read_manifest(result.model_dir)
    assert manifest["config"]["architecture"] == "rnn"


def test_registry_gets_the_model_on_success(corpus_files, tmp_path):
    src, tgt = corpus_files
    registry = ModelRegistry(tmp_path / "registry")
    doc = tiny_doc(src, tgt, tmp_path / "runs", name="demo")
    result = run_pipeline(config_from_dict(doc), registry=registry)
    entry = registry.get("demo")
    assert entry is not None and entry["deployed"]
    assert entry["path"] == str(result.model_dir.resolve())
    manifest = read_manifest(result.model_dir)
    assert entry["metrics"] == manifest["metrics"]
    assert entry["subword_fingerprint"] == manifest["subword_fingerprint"]

    reopened = ModelRegistry(tmp_path / "registry")
    assert [e["id"] for e in reopened.list_entries()] == ["demo"]


def test_duplicate_model_name_is_rejected(corpus_files, tmp_path):
    src, tgt = corpus_files
    registry = ModelRegistry(tmp_path / "registry")
    doc = tiny_doc(src, tgt, tmp_path / "runs", name="demo")
    run_pipeline(config_from_dict(doc), registry=registry)
    with pytest.raises(ConfigError, match="already registered"):
        run_pipeline(config_from_dict(tiny_doc(src, tgt, tmp_path / "r2", name="demo")),
                     registry=registry)
    assert registry.unique_id("demo") == "demo-2"


def test_registry_lists_sorted_by_id(tmp_path):
    registry = ModelRegistry(tmp_path / "registry")
    for name in ("zeta", "alpha", "mid"):
        registry.register(name, tmp_path / name)
    assert [e["id"] for e in registry.list_entries()] == ["alpha", "mid", "zeta"]


def test_missing_corpus_paths_fail_up_front(tmp_path):
    with pytest.raises(ConfigError, match="source, target"):
        run_pipeline(config_from_dict({"out_dir": str(tmp_path)}))


def test_green_report_figures_are_internally_consistent(corpus_files, tmp_path):
    src, tgt = corpus_files
    result = run_pipeline(config_from_dict(tiny_doc(src, tgt, tmp_path / "runs")))
    green = json.loads((result.model_dir / "green.json").read_text())
    assert green["kwh"] == green["watts"] * green["hours"] / 1000.0
    assert green["kgco2"] == green["watts"] * green["hours"] * green["factor_g_per_kwh"] / 1e6
    assert green["hours"] > 0.0
    assert green["region"] == "IE"


def test_run_summary_file(corpus_files, tmp_path):
    src, tgt = corpus_files
    result = run_pipeline(config_from_dict(tiny_doc(src, tgt, tmp_path / "runs")))
    summary = json.loads((result.model_dir / "run.json").read_text())
    assert summary["event"] == "training_complete"
    assert summary["model_id"] == result.model_id
    assert summary["run_id"] == result.run.run_id
    assert summary["green"]["kgco2"] == result.green.kgco2


def test_on_record_sees_every_telemetry_row(corpus_files, tmp_path):
    src, tgt = corpus_files
    seen = []
    result = run_pipeline(config_from_dict(tiny_doc(src, tgt, tmp_path / "runs")),
                          on_record=seen.append)
    assert seen == result.run.records
    assert [row["step"] for row in seen] == [3, 6]


def test_explicit_vocab_size_must_match_the_subword_model(corpus_files, tmp_path):
    src, tgt = corpus_files
    doc = tiny_doc(src, tgt, tmp_path / "runs")
    doc["model"]["vocab_size"] = 99
    with pytest.raises(ConfigError, match="vocab_size"):
        run_pipeline(config_from_dict(doc))


def test_subword_fingerprint_is_stable_across_save(corpus_files, tmp_path):
    src, tgt = corpus_files
    result = run_pipeline(config_from_dict(tiny_doc(src, tgt, tmp_path / "runs")))
    from nmtforge.subword import load_subword_model

    reloaded = load_subword_model(result.model_dir / "subword.json")
    assert subword_fingerprint(reloaded) == read_manifest(result.model_dir)["subword_fingerprint"]
