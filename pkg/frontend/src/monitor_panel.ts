// Monitor panel: poll one job, chart its telemetry, and hand finished
// models over to the translate panel.

import type { Client } from "./api.js";
import { ServiceError } from "./api.js";
import { chartSvg, fmtNum } from "./chart.js";
import { clear, el } from "./dom.js";
import {
  DEFAULT_POLL_MS,
  Poller,
  type RunView,
  type SeriesKey,
  deployTarget,
  emptyView,
  greenMirror,
  mergeStatus,
  series,
} from "./monitor.js";

const CHARTS: { key: SeriesKey; title: string }[] = [
  { key: "acc", title: "validation accuracy" },
  { key: "ppl", title: "validation perplexity" },
  { key: "xent", title: "cross entropy" },
  { key: "lr", title: "learning rate" },
];

export class MonitorPanel {
  view: RunView | null = null;
  private poller: Poller | null = null;
  private banner: string | null = null;
  private jobInput!: HTMLInputElement;
  private intervalInput!: HTMLInputElement;
  private bannerEl!: HTMLElement;
  private statusEl!: HTMLElement;

  constructor(
    private root: HTMLElement,
    private client: Client,
    private onDeploy: (modelId: string) => void,
  ) {
    this.render();
  }

  watch(jobId: string): void {
    this.banner = null;
    this.jobInput.value = jobId;
    this.view = emptyView(jobId);
    this.poller?.stop();
    const seconds = Number(this.intervalInput.value);
    const intervalMs = Number.isFinite(seconds) && seconds > 0 ? seconds * 1000 : DEFAULT_POLL_MS;
    this.poller = new Poller(() => this.tick(), intervalMs);
    this.poller.start();
    this.update();
  }

  private async tick(): Promise<void> {
    if (!this.view) return;
    try {
      const status = await this.client.job(this.view.jobId);
      this.view = mergeStatus(this.view, status);
      if (this.view.state === "done" || this.view.state === "failed") {
        this.poller?.stop();
      }
    } catch (err) {
      if (err instanceof ServiceError && err.code === "job_not_found") {
        this.banner = err.message;
        this.poller?.stop();
      } else {
        this.banner = String(err instanceof Error ? err.message : err);
      }
    }
    this.update();
  }

  private render(): void {
    clear(this.root);
    this.jobInput = el("input", { type: "text", placeholder: "job id, e.g. job-1" });
    this.intervalInput = el("input", { type: "number", min: "1", class: "interval" });
    this.intervalInput.value = String(DEFAULT_POLL_MS / 1000);
    const watch = el(
      "button",
      { class: "primary", onclick: () => this.jobInput.value.trim() && this.watch(this.jobInput.value.trim()) },
      "Watch",
    );
    this.bannerEl = el("div", { class: "banner" });
    this.statusEl = el("div");
    this.root.append(
      el(
        "div",
        { class: "monitor-controls" },
        this.jobInput,
        watch,
        el("label", { class: "interval-label" }, "poll every", this.intervalInput, "s"),
      ),
      this.bannerEl,
      this.statusEl,
    );
  }

  private update(): void {
    this.bannerEl.textContent = "";
    this.bannerEl.style.display = this.banner ? "" : "none";
    if (this.banner) {
      this.bannerEl.append(
        this.banner,
        el("button", { class: "dismiss", onclick: () => ((this.banner = null), this.update()) }, "×"),
      );
    }

    clear(this.statusEl);
    const view = this.view;
    if (!view) {
      this.statusEl.append(el("p", { class: "hint" }, "Submit a build or enter a job id to watch."));
      return;
    }

    const line = el(
      "div",
      { class: "run-head" },
      el("span", { class: `badge state-${view.state}` }, view.state),
      el("span", {}, view.jobId),
    );
    if (view.progress) {
      line.append(
        el(
          "span",
          { class: "progress" },
          `step ${view.progress.step}` +
            ` · acc ${fmtNum(view.progress.accuracy)}` +
            ` · ppl ${fmtNum(view.progress.ppl)}`,
        ),
      );
    }
    const target = deployTarget(view);
    if (target !== null) {
      line.append(el("button", { class: "primary", onclick: () => this.onDeploy(target) }, "deploy & translate"));
    }
    if (view.state === "failed" && view.error) {
      line.append(el("span", { class: "run-error" }, view.error));
    }
    this.statusEl.append(line);

    const grid = el("div", { class: "chart-grid" });
    for (const { key, title } of CHARTS) {
      const cell = el("div", { class: "chart-cell" });
      cell.innerHTML = chartSvg(series(view, key), { title });
      grid.append(cell);
    }
    this.statusEl.append(grid);

    if (view.green) {
      const g = view.green;
      this.statusEl.append(
        el(
          "div",
          { class: "green-card" },
          el("strong", {}, `${fmtNum(g.kgco2, 6)} kgCO₂`),
          el(
            "span",
            {},
            ` so far — ${fmtNum(g.watts)} W × ${fmtNum(g.hours, 6)} h × ${fmtNum(g.factor_g_per_kwh)} g/kWh` +
              ` ÷ 10⁶ = ${fmtNum(greenMirror(g), 6)} (${g.region})`,
          ),
        ),
      );
    }
  }
}
