// Build panel: edit the config document, see the same problems the
// server would report, and submit it untouched to POST /build.

import type { Client } from "./api.js";
import { ServiceError } from "./api.js";
import {
  FORM_SECTIONS,
  type FieldSpec,
  type PipelineDoc,
  type Problem,
  buildPayload,
  defaultConfig,
  getPath,
  setPath,
  submitProblems,
} from "./config.js";
import { clear, el } from "./dom.js";

export type SubmitResult = { jobId: string } | { problems: Problem[] };

/** Validate-then-POST. A document with problems never leaves the client. */
export async function submitBuild(client: Client, doc: PipelineDoc): Promise<SubmitResult> {
  const problems = submitProblems(doc);
  if (problems.length > 0) return { problems };
  const res = await client.build(buildPayload(doc));
  return { jobId: res.job_id };
}

/** Pull dotted field paths out of a server-side validation message so
 * late rejections (races, rules newer than this bundle) still land on
 * the inputs they belong to. */
export function serverProblems(message: string, knownPaths: Set<string>): Problem[] {
  const problems: Problem[] = [];
  for (const fragment of message.replace(/^invalid config: /, "").split("; ")) {
    const token = fragment.match(/[a-z_][a-z_.0-9]*/)?.[0];
    if (token && knownPaths.has(token)) problems.push({ path: token, message: fragment });
  }
  return problems;
}

export class BuildPanel {
  doc: PipelineDoc = defaultConfig();
  private inputs = new Map<string, HTMLInputElement | HTMLSelectElement>();
  private errors = new Map<string, HTMLElement>();
  private submitBtn!: HTMLButtonElement;
  private status!: HTMLElement;
  private busy = false;

  constructor(
    private root: HTMLElement,
    private client: Client,
    private onSubmitted: (jobId: string) => void,
  ) {
    this.render();
    this.refresh();
  }

  private parse(spec: FieldSpec, input: HTMLInputElement | HTMLSelectElement): unknown {
    if (spec.kind === "bool") return (input as HTMLInputElement).checked;
    const raw = input.value;
    if (spec.kind === "int" || spec.kind === "float") {
      return raw.trim() === "" ? NaN : Number(raw);
    }
    if (spec.nullable && raw === "") return null;
    return raw;
  }

  private field(spec: FieldSpec): HTMLElement {
    const value = getPath(this.doc, spec.path);
    let input: HTMLInputElement | HTMLSelectElement;
    if (spec.kind === "choice") {
      input = el("select");
      for (const choice of spec.choices ?? []) {
        input.append(el("option", { value: choice }, choice));
      }
      input.value = String(value);
    } else if (spec.kind === "bool") {
      input = el("input", { type: "checkbox" });
      (input as HTMLInputElement).checked = Boolean(value);
    } else {
      input = el("input", {
        type: spec.kind === "str" ? "text" : "number",
        ...(spec.kind === "float" ? { step: "any" } : {}),
        ...(spec.hint ? { placeholder: spec.hint } : {}),
      });
      input.value = value === null ? "" : String(value);
    }
    input.addEventListener("input", () => {
      setPath(this.doc, spec.path, this.parse(spec, input));
      this.refresh();
    });
    this.inputs.set(spec.path, input);
    const error = el("span", { class: "field-error" });
    this.errors.set(spec.path, error);
    return el("label", { class: "field" }, el("span", { class: "field-label" }, spec.label), input, error);
  }

  private render(): void {
    clear(this.root);
    const form = el("form", { class: "build-form", onsubmit: (e: Event) => e.preventDefault() });
    for (const section of FORM_SECTIONS) {
      const fs = el("fieldset", {}, el("legend", {}, section.title));
      for (const spec of section.fields) fs.append(this.field(spec));
      form.append(fs);
    }
    this.submitBtn = el("button", { class: "primary", onclick: () => void this.submit() }, "AutoBuild");
    this.status = el("span", { class: "build-status" });
    form.append(el("div", { class: "form-actions" }, this.submitBtn, this.status));
    this.root.append(form);
  }

  private showProblems(problems: Problem[]): void {
    const byPath = new Map<string, string>();
    for (const p of problems) {
      if (!byPath.has(p.path)) byPath.set(p.path, p.message);
    }
    for (const [path, span] of this.errors) {
      span.textContent = byPath.get(path) ?? "";
      this.inputs.get(path)?.classList.toggle("invalid", byPath.has(path));
    }
  }

  private refresh(): void {
    const problems = submitProblems(this.doc);
    this.showProblems(problems);
    this.submitBtn.disabled = this.busy || problems.length > 0;
  }

  private async submit(): Promise<void> {
    this.busy = true;
    this.refresh();
    this.status.textContent = "submitting…";
    try {
      const result = await submitBuild(this.client, this.doc);
      if ("jobId" in result) {
        this.status.textContent = `submitted ${result.jobId}`;
        this.onSubmitted(result.jobId);
      } else {
        this.showProblems(result.problems);
        this.status.textContent = "fix the highlighted fields";
      }
    } catch (err) {
      if (err instanceof ServiceError) {
        const inline = serverProblems(err.message, new Set(this.errors.keys()));
        if (inline.length > 0) this.showProblems(inline);
        this.status.textContent = `${err.code}: ${err.message}`;
      } else {
        this.status.textContent = String(err);
      }
    } finally {
      this.busy = false;
      const problems = submitProblems(this.doc);
      this.submitBtn.disabled = problems.length > 0;
    }
  }
}
