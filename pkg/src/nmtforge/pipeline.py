"""End-to-end orchestration: split, subword, train, report, register.

The same code path serves the single-call build and the stage-by-stage
CLI, so both produce byte-identical model files for identical configs.
Telemetry defaults to a frozen clock (elapsed_s always 0.0) to keep
those bytes reproducible; the green report always uses real wall time.
"""

import json
import time
from dataclasses import dataclass, replace
from pathlib import Path

from .checkpoint import SUBWORD_FILE, read_manifest
from .config import PipelineConfig, SubwordConfig
from .corpus import build_shared_corpus, load_parallel_corpus, split_corpus, write_splits
from .errors import ConfigError
from .green import GreenReport, green_report, write_green_report
from .subword import save_subword_model, subword_fingerprint, train_bpe, train_unigram
from .trainer import TrainingRun, derive_run_id, run_training

DATA_DIR = "data"
GREEN_FILE = "green.json"
RUN_FILE = "run.json"


def zero_clock():
    return 0.0


def train_subword(sentences, config: SubwordConfig):
    config.validate()
    if config.kind == "bpe":
        return train_bpe(sentences, config.vocab_size)
    return train_unigram(sentences, config.vocab_size)


@dataclass
class PipelineResult:
    model_id: str
    model_dir: Path
    run: TrainingRun
    green: GreenReport
    config: PipelineConfig
    entry: dict = None


def run_pipeline(config, clock=zero_clock, on_record=None, registry=None,
                 splits=None, subword=None):
    """Run every stage of the build described by `config`.

    `splits` and `subword` may be passed in to reuse artifacts prepared
    by earlier stage commands; when omitted they are built here from
    config.source/config.target. The trained model lands in
    out_dir/<model id> along with its data splits, subword model, green
    report, and run summary. A `registry` gets the model on success.
    """
    config.validate()
    started = time.monotonic()

    if splits is None:
        missing = [k for k in ("source", "target") if not getattr(config, k)]
        if missing:
            raise ConfigError("config is missing corpus paths: %s" % ", ".join(missing))
        corpus = load_parallel_corpus(config.source, config.target,
                                      name=config.name or "corpus")
        splits = split_corpus(corpus, tuple(config.ratio), config.seed)

    if subword is None:
        subword = train_subword(build_shared_corpus(splits.train), config.subword)

    model_config = config.model
    if model_config.vocab_size == 0:
        model_config = replace(model_config, vocab_size=len(subword.vocab))
    run_id = derive_run_id(model_config, config.optimizer, config.early_stop, config.seed)
    model_id = config.name or ("model-" + run_id)
    model_dir = Path(config.out_dir) / model_id

    model_dir.mkdir(parents=True, exist_ok=True)
    write_splits(splits, model_dir / DATA_DIR)
    save_subword_model(subword, model_dir / SUBWORD_FILE)

    run = run_training(splits, subword, model_config, config.optimizer, model_dir,
                       policy=config.early_stop, seed=config.seed, clock=clock,
                       notify=config.notify, on_record=on_record)

    hours = (time.monotonic() - started) / 3600.0
    green = green_report(hours, config.green.watts,
                         config.green.factor_g_per_kwh, config.green.region)
    write_green_report(green, model_dir / GREEN_FILE)

    summary = dict(run.summary())
    summary.update({"model_id": model_id, "green": green.to_dict()})
    (model_dir / RUN_FILE).write_text(
        json.dumps(summary, indent=2, sort_keys=True) + "\n", encoding="utf-8")

    entry = None
    if registry is not None:
        manifest = read_manifest(model_dir)
        entry = registry.register(
            model_id, model_dir,
            config={"model": model_config.to_dict(),
                    "optimizer": config.optimizer.to_dict(),
                    "seed": config.seed},
            metrics=manifest.get("metrics", {}),
            fingerprint=subword_fingerprint(subword))

    return PipelineResult(model_id=model_id, model_dir=model_dir, run=run,
                          green=green, config=config, entry=entry)


def autobuild(source, target, architecture="transformer", out_dir=None, name=None,
              seed=None, config=None, registry=None, clock=zero_clock, on_record=None):
    """Single-call build from two raw text files, all defaults applied.

    Produces the same bytes as running split/subword/train by hand with
    the equivalent config.
    """
    base = config or PipelineConfig()
    cfg = replace(base, source=str(source), target=str(target),
                  model=replace(base.model, architecture=architecture))
    if name is not None:
        cfg = replace(cfg, name=name)
    if out_dir is not None:
        cfg = replace(cfg, out_dir=str(out_dir))
    if seed is not None:
        cfg = replace(cfg, seed=seed)
    return run_pipeline(cfg, clock=clock, registry=registry, on_record=on_record)
