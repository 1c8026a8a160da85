// The build form edits one JSON document with the same schema the CLI
// and POST /build accept. Defaults below must stay equal to what the
// server fills in for an empty document; tests/fixtures/default_config.json
// (regenerated with `npm run fixtures`) guards against drift.

export interface SubwordDoc {
  kind: string;
  vocab_size: number;
  shared: boolean;
}

export interface ModelDoc {
  architecture: string;
  layers: number;
  heads: number;
  model_dim: number;
  ff_dim: number;
  dropout: number;
  attention_dropout: number;
  label_smoothing: number;
  vocab_size: number;
  max_len: number;
}

export interface OptimizerDoc {
  kind: string;
  learning_rate: number;
  warmup_steps: number;
  beta1: number;
  beta2: number;
  eps: number;
  average_decay: number;
  batch_tokens: number;
  max_steps: number;
  valid_every: number;
}

export interface GreenDoc {
  watts: number;
  factor_g_per_kwh: number;
  region: string;
}

export interface PipelineDoc {
  source: string | null;
  target: string | null;
  name: string | null;
  ratio: [number, number, number];
  seed: number;
  out_dir: string;
  notify: string | null;
  subword: SubwordDoc;
  model: ModelDoc;
  optimizer: OptimizerDoc;
  early_stop: { patience: number };
  green: GreenDoc;
}

export function defaultConfig(): PipelineDoc {
  return {
    source: null,
    target: null,
    name: null,
    ratio: [0.8, 0.1, 0.1],
    seed: 1,
    out_dir: "runs",
    notify: null,
    subword: { kind: "unigram", vocab_size: 4000, shared: true },
    model: {
      architecture: "transformer",
      layers: 6,
      heads: 8,
      model_dim: 256,
      ff_dim: 2048,
      dropout: 0.3,
      attention_dropout: 0.1,
      label_smoothing: 0.1,
      vocab_size: 0,
      max_len: 256,
    },
    optimizer: {
      kind: "adam",
      learning_rate: 2.0,
      warmup_steps: 8000,
      beta1: 0.9,
      beta2: 0.998,
      eps: 1e-9,
      average_decay: 0.0001,
      batch_tokens: 2048,
      max_steps: 40000,
      valid_every: 500,
    },
    early_stop: { patience: 4 },
    green: { watts: 300.0, factor_g_per_kwh: 324.0, region: "IE" },
  };
}

/** Deep copy in wire order; this exact object is what gets POSTed. */
export function buildPayload(doc: PipelineDoc): PipelineDoc {
  return JSON.parse(JSON.stringify(doc)) as PipelineDoc;
}

export type FieldKind = "int" | "float" | "str" | "bool" | "choice";

export interface FieldSpec {
  path: string;
  label: string;
  kind: FieldKind;
  choices?: readonly string[];
  nullable?: boolean;
  hint?: string;
}

export interface FormSection {
  title: string;
  fields: FieldSpec[];
}

// One table drives both the rendered form and the dotted paths used by
// validation problems, so inline errors always land on a real input.
export const FORM_SECTIONS: FormSection[] = [
  {
    title: "Corpus",
    fields: [
      { path: "source", label: "source path", kind: "str", nullable: true, hint: "server-side path to source sentences" },
      { path: "target", label: "target path", kind: "str", nullable: true, hint: "server-side path to target sentences" },
      { path: "name", label: "model name", kind: "str", nullable: true },
      { path: "notify", label: "notify", kind: "str", nullable: true, hint: "optional webhook URL" },
    ],
  },
  {
    title: "Split",
    fields: [
      { path: "ratio.0", label: "train ratio", kind: "float" },
      { path: "ratio.1", label: "validation ratio", kind: "float" },
      { path: "ratio.2", label: "test ratio", kind: "float" },
      { path: "seed", label: "seed", kind: "int" },
      { path: "out_dir", label: "output directory", kind: "str" },
    ],
  },
  {
    title: "Subword",
    fields: [
      { path: "subword.kind", label: "kind", kind: "choice", choices: ["unigram", "bpe"] },
      { path: "subword.vocab_size", label: "vocabulary size", kind: "int" },
      { path: "subword.shared", label: "shared vocabulary", kind: "bool" },
    ],
  },
  {
    title: "Model",
    fields: [
      { path: "model.architecture", label: "architecture", kind: "choice", choices: ["transformer", "rnn"] },
      { path: "model.layers", label: "layers", kind: "int" },
      { path: "model.heads", label: "attention heads", kind: "int" },
      { path: "model.model_dim", label: "model dim", kind: "int" },
      { path: "model.ff_dim", label: "feed-forward dim", kind: "int" },
      { path: "model.dropout", label: "dropout", kind: "float" },
      { path: "model.attention_dropout", label: "attention dropout", kind: "float" },
      { path: "model.label_smoothing", label: "label smoothing", kind: "float" },
      { path: "model.vocab_size", label: "vocab size (0 = from subword)", kind: "int" },
      { path: "model.max_len", label: "max length", kind: "int" },
    ],
  },
  {
    title: "Optimizer",
    fields: [
      { path: "optimizer.kind", label: "kind", kind: "choice", choices: ["adam", "sgd"] },
      { path: "optimizer.learning_rate", label: "learning rate", kind: "float" },
      { path: "optimizer.warmup_steps", label: "warmup steps", kind: "int" },
      { path: "optimizer.beta1", label: "beta1", kind: "float" },
      { path: "optimizer.beta2", label: "beta2", kind: "float" },
      { path: "optimizer.eps", label: "epsilon", kind: "float" },
      { path: "optimizer.average_decay", label: "average decay", kind: "float" },
      { path: "optimizer.batch_tokens", label: "batch tokens", kind: "int" },
      { path: "optimizer.max_steps", label: "max steps", kind: "int" },
      { path: "optimizer.valid_every", label: "validate every", kind: "int" },
    ],
  },
  {
    title: "Early stop",
    fields: [{ path: "early_stop.patience", label: "patience", kind: "int" }],
  },
  {
    title: "Green report",
    fields: [
      { path: "green.watts", label: "power draw (W)", kind: "float" },
      { path: "green.factor_g_per_kwh", label: "grid factor (g/kWh)", kind: "float" },
      { path: "green.region", label: "region", kind: "str" },
    ],
  },
];

export function getPath(doc: PipelineDoc, path: string): unknown {
  let node: unknown = doc;
  for (const part of path.split(".")) {
    node = (node as Record<string, unknown>)[part];
  }
  return node;
}

export function setPath(doc: PipelineDoc, path: string, value: unknown): void {
  const parts = path.split(".");
  let node: unknown = doc;
  for (const part of parts.slice(0, -1)) {
    node = (node as Record<string, unknown>)[part];
  }
  (node as Record<string, unknown>)[parts[parts.length - 1]] = value;
}

export interface Problem {
  path: string;
  message: string;
}

function isInt(v: unknown): v is number {
  return typeof v === "number" && Number.isInteger(v);
}

function isNum(v: unknown): v is number {
  return typeof v === "number" && Number.isFinite(v);
}

/**
 * Mirror of the rules POST /build applies, so an invalid form never
 * produces a request. Returns one problem per offending dotted path.
 */
export function validateConfig(doc: PipelineDoc): Problem[] {
  const problems: Problem[] = [];
  const bad = (path: string, message: string) => problems.push({ path, message });

  // field types first; a field that fails here is skipped by the
  // range checks below (NaN comparisons would all be false anyway)
  for (const section of FORM_SECTIONS) {
    for (const spec of section.fields) {
      const value = getPath(doc, spec.path);
      if (value === null && spec.nullable) continue;
      if (spec.kind === "int" && !isInt(value)) bad(spec.path, `${spec.path} must be an integer`);
      else if (spec.kind === "float" && !isNum(value)) bad(spec.path, `${spec.path} must be a number`);
      else if ((spec.kind === "str" || spec.kind === "choice") && typeof value !== "string")
        bad(spec.path, `${spec.path} must be a string`);
      else if (spec.kind === "bool" && typeof value !== "boolean")
        bad(spec.path, `${spec.path} must be a boolean`);
    }
  }
  if (problems.length > 0) return problems;

  const ratio = doc.ratio;
  if (ratio.length !== 3 || !ratio.every((r) => r > 0)) {
    bad("ratio", "ratio must hold three positive fractions");
  } else if (Math.abs(ratio[0] + ratio[1] + ratio[2] - 1.0) > 1e-6) {
    bad("ratio", `ratios must sum to 1, got ${ratio[0] + ratio[1] + ratio[2]}`);
  }
  if (doc.seed < 0) bad("seed", "seed must be >= 0");
  if (doc.out_dir === "") bad("out_dir", "out_dir must not be empty");
  if (doc.name !== null && (doc.name.includes("/") || ["", ".", ".."].includes(doc.name))) {
    bad("name", "name must be a plain directory name");
  }

  const sub = doc.subword;
  if (sub.kind !== "bpe" && sub.kind !== "unigram") {
    bad("subword.kind", "subword.kind must be one of bpe, unigram");
  }
  if (sub.vocab_size < 5) bad("subword.vocab_size", "subword.vocab_size must be >= 5");
  if (!sub.shared) {
    bad(
      "subword.shared",
      "separate source and target vocabularies are not supported; subword.shared must stay true",
    );
  }

  const m = doc.model;
  if (m.architecture !== "rnn" && m.architecture !== "transformer") {
    bad("model.architecture", `unknown architecture: ${m.architecture}`);
  }
  if (m.layers < 1) bad("model.layers", "layers must be >= 1");
  if (m.heads < 1) {
    bad("model.heads", "heads must be >= 1");
  } else if (m.model_dim % m.heads !== 0) {
    const msg = `model_dim ${m.model_dim} not divisible by heads ${m.heads}`;
    bad("model.model_dim", msg);
    bad("model.heads", msg);
  }
  for (const name of ["dropout", "attention_dropout", "label_smoothing"] as const) {
    const p = m[name];
    if (!(p >= 0 && p < 1)) bad(`model.${name}`, `${name} must lie in [0, 1)`);
  }
  // 0 is the "fill in from the trained subword model" sentinel
  if (m.vocab_size !== 0 && m.vocab_size < 5) {
    bad("model.vocab_size", "vocab_size must cover specials plus content");
  }
  if (m.max_len < 2) bad("model.max_len", "max_len must be >= 2");

  const opt = doc.optimizer;
  if (opt.kind !== "sgd" && opt.kind !== "adam") {
    bad("optimizer.kind", `unknown optimizer ${opt.kind}, expected one of sgd, adam`);
  }
  if (opt.learning_rate <= 0) bad("optimizer.learning_rate", "learning_rate must be positive");
  if (opt.warmup_steps < 1) bad("optimizer.warmup_steps", "warmup_steps must be at least 1");
  for (const name of ["beta1", "beta2"] as const) {
    const b = opt[name];
    if (!(b >= 0 && b < 1)) bad(`optimizer.${name}`, `${name} must lie in [0, 1)`);
  }
  if (opt.eps <= 0) bad("optimizer.eps", "eps must be positive");
  if (!(opt.average_decay >= 0 && opt.average_decay <= 1)) {
    bad("optimizer.average_decay", "average_decay must lie in [0, 1]");
  }
  for (const name of ["batch_tokens", "max_steps", "valid_every"] as const) {
    if (opt[name] < 1) bad(`optimizer.${name}`, `${name} must be at least 1`);
  }

  if (doc.early_stop.patience < 1) bad("early_stop.patience", "patience must be at least 1");
  if (doc.green.watts <= 0) bad("green.watts", "green.watts must be positive");
  if (doc.green.factor_g_per_kwh < 0) {
    bad("green.factor_g_per_kwh", "green.factor_g_per_kwh must be >= 0");
  }
  return problems;
}

/** POST /build also rejects configs without corpus paths. */
export function missingCorpus(doc: PipelineDoc): Problem[] {
  const problems: Problem[] = [];
  if (!doc.source) problems.push({ path: "source", message: "corpus path required to build" });
  if (!doc.target) problems.push({ path: "target", message: "corpus path required to build" });
  return problems;
}

/** Everything POST /build checks; submit stays disabled while non-empty. */
export function submitProblems(doc: PipelineDoc): Problem[] {
  return [...validateConfig(doc), ...missingCorpus(doc)];
}
