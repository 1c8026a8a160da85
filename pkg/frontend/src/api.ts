// Typed client for the translation service JSON API. Every shape here
// mirrors a documented endpoint response; nothing is computed locally.

export interface Health {
  status: string;
  version: string;
  models: number;
}

export interface ModelEntry {
  id: string;
  path: string;
  subword_fingerprint: string | null;
  config: Record<string, unknown>;
  metrics: Record<string, unknown>;
  deployed: boolean;
}

export interface TelemetryRecord {
  step: number;
  lr: number;
  xent: number;
  acc: number;
  ppl: number;
  elapsed_s: number;
}

export interface GreenSnapshot {
  watts: number;
  hours: number;
  kwh: number;
  factor_g_per_kwh: number;
  kgco2: number;
  region: string;
}

export interface JobProgress {
  step: number;
  accuracy: number | null;
  ppl: number | null;
}

export type JobState = "queued" | "running" | "done" | "failed";

export interface JobStatus {
  job_id: string;
  state: JobState;
  model_id: string | null;
  error: string | null;
  progress: JobProgress;
  telemetry: TelemetryRecord[];
  latest: TelemetryRecord | null;
  green: GreenSnapshot;
}

export type DecodeMode = "greedy" | "beam";

// The server accepts exactly one of `model` / `ensemble`.
export type TranslateRequest = {
  sentences: string[];
  mode: DecodeMode;
  beam_width: number;
} & ({ model: string } | { ensemble: string[] });

export interface TranslateResponse {
  translations: string[];
  logprobs: number[];
}

export type FetchLike = (input: string, init?: RequestInit) => Promise<Response>;

/** Error responses carry a stable machine code alongside the message. */
export class ServiceError extends Error {
  constructor(
    public status: number,
    public code: string,
    message: string,
  ) {
    super(message);
    this.name = "ServiceError";
  }
}

export class Client {
  private fetchFn: FetchLike;

  constructor(fetchFn?: FetchLike, private base = "") {
    this.fetchFn = fetchFn ?? ((input, init) => globalThis.fetch(input, init));
  }

  private async request<T>(method: string, path: string, body?: unknown): Promise<T> {
    const init: RequestInit = { method };
    if (body !== undefined) {
      init.headers = { "content-type": "application/json" };
      init.body = JSON.stringify(body);
    }
    let res: Response;
    try {
      res = await this.fetchFn(this.base + path, init);
    } catch (err) {
      throw new ServiceError(0, "unreachable", `service unreachable: ${String(err)}`);
    }
    const text = await res.text();
    let data: unknown = null;
    if (text !== "") {
      try {
        data = JSON.parse(text);
      } catch {
        throw new ServiceError(res.status, "bad_response", "service returned non-JSON body");
      }
    }
    if (!res.ok) {
      const err = data as { code?: string; message?: string } | null;
      throw new ServiceError(
        res.status,
        err?.code ?? `http_${res.status}`,
        err?.message ?? `request failed with status ${res.status}`,
      );
    }
    return data as T;
  }

  health(): Promise<Health> {
    return this.request("GET", "/health");
  }

  models(): Promise<{ models: ModelEntry[] }> {
    return this.request("GET", "/models");
  }

  build(doc: unknown): Promise<{ job_id: string }> {
    return this.request("POST", "/build", doc);
  }

  job(jobId: string): Promise<JobStatus> {
    return this.request("GET", "/jobs/" + encodeURIComponent(jobId));
  }

  translate(req: TranslateRequest): Promise<TranslateResponse> {
    return this.request("POST", "/translate", req);
  }
}
