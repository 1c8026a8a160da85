"""One JSON document drives every pipeline stage.

An empty document ``{}`` is a complete configuration: every knob falls
back to the tuned default. Parsing is strict in both directions, so a
misspelled key ("learnign_rate") or a value of the wrong type is
rejected by its dotted path instead of silently training with defaults.
"""

import json
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path

from .errors import ConfigError
from .green import DEFAULT_FACTOR_G_PER_KWH, DEFAULT_REGION
from .models import ModelConfig
from .optim import OptimizerConfig
from .trainer import EarlyStopPolicy

SUBWORD_KINDS = ("bpe", "unigram")
DEFAULT_RATIO = (0.8, 0.1, 0.1)


@dataclass
class SubwordConfig:
    """Joint source+target segmentation settings."""

    kind: str = "unigram"
    vocab_size: int = 4000
    shared: bool = True

    def validate(self):
        if self.kind not in SUBWORD_KINDS:
            raise ConfigError(
                "subword.kind must be one of %s, got %r" % (", ".join(SUBWORD_KINDS), self.kind)
            )
        if self.vocab_size < 5:
            raise ConfigError("subword.vocab_size must be >= 5, got %r" % (self.vocab_size,))
        if not self.shared:
            raise ConfigError(
                "separate source and target vocabularies are not supported; "
                "subword.shared must stay true"
            )
        return self

    def to_dict(self):
        return asdict(self)


@dataclass
class GreenConfig:
    """Power draw and grid carbon intensity for the green report."""

    watts: float = 300.0
    factor_g_per_kwh: float = DEFAULT_FACTOR_G_PER_KWH
    region: str = DEFAULT_REGION

    def validate(self):
        if self.watts <= 0:
            raise ConfigError("green.watts must be positive, got %r" % (self.watts,))
        if self.factor_g_per_kwh < 0:
            raise ConfigError(
                "green.factor_g_per_kwh must be >= 0, got %r" % (self.factor_g_per_kwh,)
            )
        return self

    def to_dict(self):
        return asdict(self)


@dataclass
class PipelineConfig:
    """Everything needed to go from raw parallel text to a deployed model."""

    source: str = None
    target: str = None
    name: str = None
    ratio: tuple = DEFAULT_RATIO
    seed: int = 1
    out_dir: str = "runs"
    notify: str = None
    subword: SubwordConfig = field(default_factory=SubwordConfig)
    model: ModelConfig = field(default_factory=ModelConfig)
    optimizer: OptimizerConfig = field(default_factory=OptimizerConfig)
    early_stop: EarlyStopPolicy = field(default_factory=EarlyStopPolicy)
    green: GreenConfig = field(default_factory=GreenConfig)

    def validate(self):
        ratio = tuple(self.ratio)
        if len(ratio) != 3 or not all(r > 0 for r in ratio):
            raise ConfigError("ratio must hold three positive fractions, got %r" % (self.ratio,))
        if abs(sum(ratio) - 1.0) > 1e-6:
            raise ConfigError("ratios must sum to 1, got %r" % (sum(ratio),))
        if self.seed < 0:
            raise ConfigError("seed must be >= 0, got %r" % (self.seed,))
        if not self.out_dir:
            raise ConfigError("out_dir must not be empty")
        if self.name is not None and ("/" in self.name or self.name in ("", ".", "..")):
            raise ConfigError("name must be a plain directory name, got %r" % (self.name,))
        self.subword.validate()
        self.green.validate()
        self.early_stop.validate()
        self.optimizer.validate()
        # vocab_size 0 means "fill in from the subword model later", so
        # probe the rest of the model settings with a placeholder.
        probe = self.model if self.model.vocab_size else replace(self.model, vocab_size=5)
        probe.validate()
        return self

    def to_dict(self):
        return {
            "source": self.source,
            "target": self.target,
            "name": self.name,
            "ratio": list(self.ratio),
            "seed": self.seed,
            "out_dir": self.out_dir,
            "notify": self.notify,
            "subword": self.subword.to_dict(),
            "model": self.model.to_dict(),
            "optimizer": self.optimizer.to_dict(),
            "early_stop": {"patience": self.early_stop.patience},
            "green": self.green.to_dict(),
        }


_TYPE_NAMES = {"str": "a string", "int": "an integer", "float": "a number", "bool": "a boolean"}

_TOP_SCALARS = {
    "source": "str",
    "target": "str",
    "name": "str",
    "notify": "str",
    "seed": "int",
    "out_dir": "str",
}
_NULLABLE = frozenset(("source", "target", "name", "notify"))

_SUBWORD_FIELDS = {"kind": "str", "vocab_size": "int", "shared": "bool"}
_MODEL_FIELDS = {
    "architecture": "str",
    "layers": "int",
    "heads": "int",
    "model_dim": "int",
    "ff_dim": "int",
    "dropout": "float",
    "attention_dropout": "float",
    "label_smoothing": "float",
    "vocab_size": "int",
    "max_len": "int",
}
_OPTIMIZER_FIELDS = {
    "kind": "str",
    "learning_rate": "float",
    "warmup_steps": "int",
    "beta1": "float",
    "beta2": "float",
    "eps": "float",
    "average_decay": "float",
    "batch_tokens": "int",
    "max_steps": "int",
    "valid_every": "int",
}
_EARLY_STOP_FIELDS = {"patience": "int"}
_GREEN_FIELDS = {"watts": "float", "factor_g_per_kwh": "float", "region": "str"}

_SECTIONS = ("subword", "model", "optimizer", "early_stop", "green")


def _scalar_ok(value, kind):
    # JSON booleans are ints to isinstance, so rule them out explicitly
    # anywhere a numeric field is expected.
    if kind == "str":
        return isinstance(value, str)
    if kind == "bool":
        return isinstance(value, bool)
    if isinstance(value, bool):
        return False
    if kind == "int":
        return isinstance(value, int)
    return isinstance(value, (int, float))


def config_from_dict(doc):
    """Build a validated PipelineConfig from a parsed JSON object.

    All unknown keys and type mismatches are gathered before raising so
    a bad document fails once, with the complete list of offenders.
    """
    if not isinstance(doc, dict):
        raise ConfigError("config must be a JSON object, got %s" % type(doc).__name__)
    problems = []

    def collect(section, fields, where, nullable=frozenset()):
        out = {}
        label = (" in " + where) if where else ""
        for key in sorted(set(section) - set(fields)):
            problems.append("unknown key %r%s" % (key, label))
        for key, kind in fields.items():
            if key not in section:
                continue
            value = section[key]
            path = "%s.%s" % (where, key) if where else key
            if value is None:
                if key in nullable:
                    out[key] = None
                else:
                    problems.append("%s must be %s, got null" % (path, _TYPE_NAMES[kind]))
                continue
            if not _scalar_ok(value, kind):
                problems.append("%s must be %s, got %r" % (path, _TYPE_NAMES[kind], value))
                continue
            out[key] = float(value) if kind == "float" else value
        return out

    known_top = set(_TOP_SCALARS) | set(_SECTIONS) | {"ratio"}
    for key in sorted(set(doc) - known_top):
        problems.append("unknown key %r" % key)
    top = collect(
        {k: v for k, v in doc.items() if k in _TOP_SCALARS}, _TOP_SCALARS, "", _NULLABLE
    )

    ratio = DEFAULT_RATIO
    if doc.get("ratio") is not None:
        raw = doc["ratio"]
        bad = (
            not isinstance(raw, (list, tuple))
            or len(raw) != 3
            or any(isinstance(r, bool) or not isinstance(r, (int, float)) for r in raw)
        )
        if bad:
            problems.append("ratio must be a list of three numbers, got %r" % (raw,))
        else:
            ratio = tuple(float(r) for r in raw)

    def section(key):
        value = doc.get(key)
        if value is None:
            return {}
        if not isinstance(value, dict):
            problems.append("%s must be an object, got %r" % (key, value))
            return {}
        return value

    sub = collect(section("subword"), _SUBWORD_FIELDS, "subword")
    mod = collect(section("model"), _MODEL_FIELDS, "model")
    opt = collect(section("optimizer"), _OPTIMIZER_FIELDS, "optimizer")
    stop = collect(section("early_stop"), _EARLY_STOP_FIELDS, "early_stop")
    green = collect(section("green"), _GREEN_FIELDS, "green")

    if problems:
        raise ConfigError("invalid config: " + "; ".join(problems))

    config = PipelineConfig(
        source=top.get("source"),
        target=top.get("target"),
        name=top.get("name"),
        notify=top.get("notify"),
        seed=top.get("seed", 1),
        out_dir=top.get("out_dir", "runs"),
        ratio=ratio,
        subword=SubwordConfig(**sub),
        model=ModelConfig(**mod),
        optimizer=OptimizerConfig(**opt),
        early_stop=EarlyStopPolicy(**stop),
        green=GreenConfig(**green),
    )
    return config.validate()


def _reject_constant(token):
    raise ValueError("%s is not allowed in a config document" % token)


def parse_config(path):
    """Read and validate a JSON config file.

    An empty object yields the full defaults; parse_config(p) twice is
    stable, and dumps_config() round-trips through it unchanged.
    """
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError("cannot read config %s: %s" % (path, exc)) from exc
    try:
        doc = json.loads(text, parse_constant=_reject_constant)
    except ValueError as exc:
        raise ConfigError("config %s is not valid JSON: %s" % (path, exc)) from exc
    return config_from_dict(doc)


def dumps_config(config):
    return json.dumps(config.to_dict(), indent=2, sort_keys=True) + "\n"
