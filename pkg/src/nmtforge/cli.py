"""Command line front door: one subcommand per pipeline stage.

Every command prints a single JSON line on stdout when it succeeds.
Failures print ``error [stage] code: message`` on stderr and exit with
the stage's code (config 2, corpus 3, subword 4, model 5, train 6,
translate 7, evaluate 8, serve 9).
"""

import argparse
import json
import os
import sys
from dataclasses import replace
from pathlib import Path

from . import __version__
from .checkpoint import SUBWORD_FILE, load_model
from .config import PipelineConfig, parse_config
from .corpus import build_shared_corpus, load_parallel_corpus, read_splits, \
    split_corpus, write_splits
from .errors import ConfigError, ForgeError, MetricsError
from .green import green_report
from .inference import DecodeConfig, check_ensemble_fingerprints, translate_file
from .metrics import EvalPair, METRIC_NAMES, metric_report
from .pipeline import DATA_DIR, GREEN_FILE, autobuild, run_pipeline, train_subword
from .registry import ModelRegistry
from .subword import load_subword_model, subword_fingerprint, save_subword_model


def _env_int(name):
    raw = os.environ.get(name)
    if raw is None:
        return None
    try:
        return int(raw)
    except ValueError:
        raise ConfigError("%s must be an integer, got %r" % (name, raw))


def _load_config(args):
    config = parse_config(args.config) if args.config else PipelineConfig()
    out = args.out or os.environ.get("FORGE_OUT")
    if out:
        config = replace(config, out_dir=str(out))
    seed = args.seed if args.seed is not None else _env_int("FORGE_SEED")
    if seed is not None:
        config = replace(config, seed=seed)
    return config.validate()


def _registry_from(args):
    root = getattr(args, "registry", None) or os.environ.get("FORGE_REGISTRY")
    return ModelRegistry(root) if root else None


def _emit(payload):
    print(json.dumps(payload, sort_keys=True))


def _corpus_name(config):
    return config.name or "corpus"


def cmd_split(args):
    config = _load_config(args)
    source = args.source or config.source
    target = args.target or config.target
    if not source or not target:
        raise ConfigError("split needs --source and --target, or a config naming them")
    corpus = load_parallel_corpus(source, target, name=_corpus_name(config))
    splits = split_corpus(corpus, tuple(config.ratio), config.seed)
    out = Path(config.out_dir) / DATA_DIR
    write_splits(splits, out)
    _emit({"dir": str(out), "train": len(splits.train), "valid": len(splits.valid),
           "test": len(splits.test)})
    return 0


def cmd_subword(args):
    config = _load_config(args)
    splits = read_splits(args.splits_dir, _corpus_name(config))
    subword = train_subword(build_shared_corpus(splits.train), config.subword)
    out_path = Path(config.out_dir) / SUBWORD_FILE
    save_subword_model(subword, out_path)
    _emit({"path": str(out_path), "pieces": len(subword.vocab),
           "fingerprint": subword_fingerprint(subword)})
    return 0


def _result_payload(result):
    run = result.run
    return {
        "model_id": result.model_id,
        "model_dir": str(result.model_dir),
        "run_id": run.run_id,
        "steps": run.steps_completed,
        "stopped": run.stopped,
        "best_accuracy": run.best_accuracy,
        "best_step": run.best_step,
        "kgco2": result.green.kgco2,
    }


def cmd_train(args):
    config = _load_config(args)
    splits = None
    if args.splits_dir:
        splits = read_splits(args.splits_dir, _corpus_name(config))
    subword = load_subword_model(args.subword) if args.subword else None
    result = run_pipeline(config, splits=splits, subword=subword,
                          registry=_registry_from(args))
    _emit(_result_payload(result))
    return 0


def cmd_autobuild(args):
    config = parse_config(args.config) if args.config else PipelineConfig()
    seed = args.seed if args.seed is not None else _env_int("FORGE_SEED")
    out = args.out or os.environ.get("FORGE_OUT")
    result = autobuild(args.source, args.target, architecture=args.arch,
                       out_dir=out, name=args.name, seed=seed, config=config,
                       registry=_registry_from(args))
    _emit(_result_payload(result))
    return 0


def cmd_translate(args):
    models = []
    fingerprints = []
    subword = None
    for model_dir in args.model:
        model, sub, manifest = load_model(model_dir)
        models.append(model)
        fingerprints.append(manifest.get("subword_fingerprint"))
        if subword is None:
            subword = sub
    check_ensemble_fingerprints(fingerprints)
    decode_config = DecodeConfig(mode=args.mode, beam_width=args.beam_width,
                                 max_len=args.max_len,
                                 length_penalty=args.length_penalty).validate()
    out_path, scores_path = translate_file(models, subword, args.input, args.output,
                                           decode_config, scores_path=args.scores)
    lines = len(Path(out_path).read_text(encoding="utf-8").splitlines())
    _emit({"lines": lines, "output": str(out_path), "scores": str(scores_path)})
    return 0


def _read_eval_lines(path):
    try:
        return Path(path).read_text(encoding="utf-8").splitlines()
    except OSError as exc:
        raise MetricsError("cannot read %s: %s" % (path, exc)) from exc


def cmd_evaluate(args):
    pair = EvalPair(hypotheses=_read_eval_lines(args.hyp),
                    references=_read_eval_lines(args.ref),
                    lowercase=args.lowercase)
    names = [m.strip() for m in args.metrics.split(",")] if args.metrics else None
    report = metric_report(pair, metrics=names, per_sentence=args.sentence is not None)
    if args.sentence:
        columns = ("line", "bleu", "ter", "chrf1", "chrf3", "f1")
        rows = ["\t".join(columns)]
        for row in report.per_sentence:
            rows.append("\t".join(str(row[c]) for c in columns))
        Path(args.sentence).write_text("".join(r + "\n" for r in rows), encoding="utf-8")
    doc = report.to_dict()
    doc.pop("per_sentence", None)
    _emit(doc)
    return 0


def cmd_report(args):
    if args.model:
        path = Path(args.model) / GREEN_FILE
        try:
            doc = json.loads(path.read_text(encoding="utf-8"))
        except (OSError, ValueError) as exc:
            raise ConfigError("cannot read green report %s: %s" % (path, exc)) from exc
        _emit(doc)
        return 0
    if args.hours is None or args.watts is None:
        raise ConfigError("report needs --hours and --watts, or --model DIR")
    factor = args.factor if args.factor is not None else 324.0
    _emit(green_report(args.hours, args.watts, factor, args.region).to_dict())
    return 0


def cmd_serve(args):
    import uvicorn

    from .service import create_app

    registry_root = args.registry or os.environ.get("FORGE_REGISTRY") or "registry"
    port = args.port if args.port is not None else (_env_int("FORGE_PORT") or 8000)
    app = create_app(registry_root)
    uvicorn.run(app, host=args.host, port=port, log_level="warning")
    return 0


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON config file; omitted fields use defaults")
    common.add_argument("--out", help="output directory (or FORGE_OUT)")
    common.add_argument("--seed", type=int, help="random seed (or FORGE_SEED)")

    parser = argparse.ArgumentParser(
        prog="nmtforge",
        description="Train, evaluate, and serve translation models from the command line.")
    parser.add_argument("--version", action="version", version="nmtforge " + __version__)
    sub = parser.add_subparsers(dest="command", required=True, metavar="command")

    p = sub.add_parser("split", parents=[common],
                       help="split a parallel corpus into train/valid/test files")
    p.add_argument("--source", help="source-language text, one sentence per line")
    p.add_argument("--target", help="target-language text, aligned line by line")
    p.set_defaults(func=cmd_split)

    p = sub.add_parser("subword", parents=[common],
                       help="train the shared subword model from written splits")
    p.add_argument("--splits-dir", required=True, help="directory written by split")
    p.set_defaults(func=cmd_subword)

    p = sub.add_parser("train", parents=[common],
                       help="train a model (reusing split/subword artifacts if given)")
    p.add_argument("--splits-dir", help="reuse splits written by the split command")
    p.add_argument("--subword", help="reuse a trained subword model file")
    p.add_argument("--registry", help="register the model here (or FORGE_REGISTRY)")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("autobuild", parents=[common],
                       help="single-command build: split, subword, train, register")
    p.add_argument("--source", required=True)
    p.add_argument("--target", required=True)
    p.add_argument("--arch", default="transformer", choices=("transformer", "rnn"))
    p.add_argument("--name", help="model id (defaults to model-<run id>)")
    p.add_argument("--registry", help="register the model here (or FORGE_REGISTRY)")
    p.set_defaults(func=cmd_autobuild)

    p = sub.add_parser("translate", help="translate a file with one or more models")
    p.add_argument("--model", action="append", required=True,
                   help="model directory; repeat for an ensemble")
    p.add_argument("--input", required=True)
    p.add_argument("--output", required=True)
    p.add_argument("--mode", default="beam", choices=("greedy", "beam"))
    p.add_argument("--beam-width", type=int, default=5)
    p.add_argument("--max-len", type=int, default=64)
    p.add_argument("--length-penalty", type=float, default=0.0)
    p.add_argument("--scores", help="sidecar path (default: <output>.scores.jsonl)")
    p.set_defaults(func=cmd_translate)

    p = sub.add_parser("evaluate", help="score hypotheses against references")
    p.add_argument("--hyp", required=True)
    p.add_argument("--ref", required=True)
    p.add_argument("--lowercase", action="store_true")
    p.add_argument("--metrics", help="comma list from: %s" % ", ".join(METRIC_NAMES))
    p.add_argument("--sentence", help="also write per-sentence scores to this TSV")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("report", help="print a green report")
    p.add_argument("--model", help="model directory holding green.json")
    p.add_argument("--hours", type=float)
    p.add_argument("--watts", type=float)
    p.add_argument("--factor", type=float, help="grid gCO2 per kWh (default 324)")
    p.add_argument("--region", default="IE")
    p.set_defaults(func=cmd_report)

    p = sub.add_parser("serve", help="run the HTTP translation service")
    p.add_argument("--registry", help="registry root (or FORGE_REGISTRY)")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, help="port (or FORGE_PORT, default 8000)")
    p.set_defaults(func=cmd_serve)

    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        return args.func(args) or 0
    except ForgeError as err:
        print("error [%s] %s: %s" % (err.stage, err.code, err), file=sys.stderr)
        return err.exit_code


if __name__ == "__main__":
    sys.exit(main())
