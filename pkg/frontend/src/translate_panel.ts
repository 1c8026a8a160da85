// Translate panel: pick deployed models, type sentences, compare
// settings across submissions in the history list.

import type { Client, ModelEntry } from "./api.js";
import { fmtNum } from "./chart.js";
import { clear, el } from "./dom.js";
import {
  type HistoryEntry,
  TranslateLog,
  canTranslate,
  defaultTranslateForm,
} from "./translate.js";

export class TranslatePanel {
  form = defaultTranslateForm();
  available: ModelEntry[] = [];
  log: TranslateLog;
  private modelsEl!: HTMLElement;
  private historyEl!: HTMLElement;
  private submitBtn!: HTMLButtonElement;
  private beamValue!: HTMLElement;
  private noticeEl!: HTMLElement;

  constructor(
    private root: HTMLElement,
    private client: Client,
  ) {
    this.log = new TranslateLog(client, () => this.renderHistory());
    this.render();
    void this.refreshModels();
  }

  async refreshModels(): Promise<void> {
    try {
      const res = await this.client.models();
      this.available = res.models.filter((m) => m.deployed);
      // drop selections that disappeared from the registry
      this.form.models = this.form.models.filter((id) => this.available.some((m) => m.id === id));
      this.noticeEl.textContent = this.available.length === 0 ? "no deployed models yet" : "";
    } catch (err) {
      this.noticeEl.textContent = String(err instanceof Error ? err.message : err);
    }
    this.renderModels();
  }

  /** Jump-off point for the monitor panel's "deploy & translate". */
  async preselect(modelId: string): Promise<void> {
    await this.refreshModels();
    if (this.available.some((m) => m.id === modelId)) {
      this.form.models = [modelId];
      this.renderModels();
    }
  }

  private toggleModel(id: string, checked: boolean): void {
    if (this.form.ensemble) {
      const selected = new Set(this.form.models);
      if (checked) selected.add(id);
      else selected.delete(id);
      // keep checklist order, not click order, so requests are stable
      this.form.models = this.available.map((m) => m.id).filter((mid) => selected.has(mid));
    } else {
      this.form.models = checked ? [id] : [];
    }
    this.renderModels();
  }

  private renderModels(): void {
    clear(this.modelsEl);
    const kind = this.form.ensemble ? "checkbox" : "radio";
    for (const entry of this.available) {
      const input = el("input", { type: kind, name: "model-pick" }) as HTMLInputElement;
      input.checked = this.form.models.includes(entry.id);
      input.addEventListener("change", () => this.toggleModel(entry.id, input.checked));
      this.modelsEl.append(el("label", { class: "model-pick" }, input, entry.id));
    }
    this.refresh();
  }

  private refresh(): void {
    this.submitBtn.disabled = !canTranslate(this.form);
    this.beamValue.textContent = String(this.form.beamWidth);
  }

  private render(): void {
    clear(this.root);
    this.noticeEl = el("span", { class: "hint" });
    this.modelsEl = el("div", { class: "model-list" });

    const ensemble = el("input", { type: "checkbox" }) as HTMLInputElement;
    ensemble.addEventListener("change", () => {
      this.form.ensemble = ensemble.checked;
      if (!ensemble.checked && this.form.models.length > 1) {
        this.form.models = this.form.models.slice(0, 1);
      }
      this.renderModels();
    });
    const refresh = el("button", { onclick: () => void this.refreshModels() }, "refresh");

    const text = el("textarea", {
      rows: "4",
      placeholder: "one sentence per line",
    }) as HTMLTextAreaElement;
    text.addEventListener("input", () => {
      this.form.text = text.value;
      this.refresh();
    });

    const mode = el("select", {}, el("option", { value: "beam" }, "beam"), el("option", { value: "greedy" }, "greedy"));
    mode.value = this.form.mode;
    mode.addEventListener("change", () => {
      this.form.mode = mode.value as "beam" | "greedy";
      this.refresh();
    });

    const beam = el("input", { type: "range", min: "1", max: "12", step: "1" }) as HTMLInputElement;
    beam.value = String(this.form.beamWidth);
    this.beamValue = el("span", { class: "beam-value" }, String(this.form.beamWidth));
    beam.addEventListener("input", () => {
      this.form.beamWidth = Number(beam.value);
      this.refresh();
    });

    this.submitBtn = el("button", { class: "primary" }, "Translate");
    this.submitBtn.addEventListener("click", () => {
      if (canTranslate(this.form)) void this.log.submit(this.form);
    });

    this.historyEl = el("div", { class: "history" });
    this.root.append(
      el("div", { class: "models-head" }, el("strong", {}, "Models"), refresh, el("label", { class: "ensemble-toggle" }, ensemble, "ensemble"), this.noticeEl),
      this.modelsEl,
      text,
      el(
        "div",
        { class: "translate-controls" },
        el("label", {}, "mode ", mode),
        el("label", {}, "beam width ", beam, this.beamValue),
        this.submitBtn,
      ),
      this.historyEl,
    );
    this.refresh();
  }

  private entryCard(entry: HistoryEntry): HTMLElement {
    const req = entry.request;
    const ids = "model" in req ? req.model : req.ensemble.join(" + ");
    const card = el(
      "div",
      { class: "history-entry" + (entry.pending ? " pending" : "") },
      el("div", { class: "entry-head" }, `${ids} · ${req.mode} · beam ${req.beam_width}`),
    );
    if (entry.errorCode !== null) {
      card.append(el("div", { class: "entry-error" }, `${entry.errorCode}: ${entry.errorMessage ?? ""}`));
      return card;
    }
    if (entry.pending) {
      card.append(el("div", { class: "hint" }, "translating…"));
      return card;
    }
    req.sentences.forEach((src, i) => {
      card.append(
        el(
          "div",
          { class: "entry-row" },
          el("span", { class: "entry-src" }, src),
          el("span", { class: "entry-hyp" }, entry.translations?.[i] ?? ""),
          el("span", { class: "entry-score" }, fmtNum(entry.logprobs?.[i], 5)),
        ),
      );
    });
    return card;
  }

  private renderHistory(): void {
    clear(this.historyEl);
    for (const entry of this.log.entries) {
      this.historyEl.append(this.entryCard(entry));
    }
  }
}
