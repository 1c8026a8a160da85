// Run monitoring state. A view is replaced wholesale by each accepted
// poll response; nothing is recomputed client-side, so the chart series
// are the served telemetry records verbatim.

import type { GreenSnapshot, JobProgress, JobStatus, TelemetryRecord } from "./api.js";

export interface RunView {
  jobId: string;
  state: string;
  modelId: string | null;
  error: string | null;
  progress: JobProgress | null;
  telemetry: TelemetryRecord[];
  latest: TelemetryRecord | null;
  green: GreenSnapshot | null;
}

export function emptyView(jobId: string): RunView {
  return {
    jobId,
    state: "unknown",
    modelId: null,
    error: null,
    progress: null,
    telemetry: [],
    latest: null,
    green: null,
  };
}

/**
 * Fold one poll response into the view. Responses can arrive out of
 * order; the one carrying the highest step wins. Ties go to the later
 * arrival so a state flip (running -> done) lands even when no new
 * telemetry record came with it.
 */
export function mergeStatus(view: RunView, status: JobStatus): RunView {
  const seen = view.latest ? view.latest.step : -1;
  const got = status.latest ? status.latest.step : -1;
  if (got < seen) return view;
  return {
    jobId: status.job_id,
    state: status.state,
    modelId: status.model_id,
    error: status.error,
    progress: status.progress,
    telemetry: status.telemetry,
    latest: status.latest,
    green: status.green,
  };
}

export type SeriesKey = "acc" | "ppl" | "xent" | "lr";

export interface Series {
  steps: number[];
  values: number[];
}

/** Chart input, lifted field-for-field from the telemetry records. */
export function series(view: RunView, key: SeriesKey): Series {
  return {
    steps: view.telemetry.map((r) => r.step),
    values: view.telemetry.map((r) => r[key]),
  };
}

/**
 * Re-derive kgCO2 from the other displayed fields, with the same
 * single-division arithmetic the server uses. Equals the served kgco2
 * exactly; shown so the readout is checkable by eye.
 */
export function greenMirror(green: GreenSnapshot): number {
  return (green.watts * green.hours * green.factor_g_per_kwh) / 1e6;
}

/** Model id to offer for translation once the build is done. */
export function deployTarget(view: RunView): string | null {
  return view.state === "done" && view.modelId !== null ? view.modelId : null;
}

export const DEFAULT_POLL_MS = 2000;

type Task = () => Promise<void>;

/**
 * Fixed-interval repeating task. Ticks are fire-and-forget; a slow
 * response overlapping the next tick is fine because mergeStatus
 * resolves ordering by step.
 */
export class Poller {
  private timer: ReturnType<typeof setInterval> | null = null;

  constructor(
    private task: Task,
    public intervalMs: number = DEFAULT_POLL_MS,
  ) {}

  get running(): boolean {
    return this.timer !== null;
  }

  start(): void {
    this.stop();
    void this.task();
    this.timer = setInterval(() => void this.task(), this.intervalMs);
  }

  stop(): void {
    if (this.timer !== null) {
      clearInterval(this.timer);
      this.timer = null;
    }
  }
}
