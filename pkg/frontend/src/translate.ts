// Translate panel logic: request construction, submit gating, and the
// per-panel history of scored submissions.

import type { Client, DecodeMode, TranslateRequest } from "./api.js";
import { ServiceError } from "./api.js";

export interface TranslateForm {
  models: string[]; // checked model ids, in checklist order
  ensemble: boolean;
  text: string;
  mode: DecodeMode;
  beamWidth: number;
}

export function defaultTranslateForm(): TranslateForm {
  return { models: [], ensemble: false, text: "", mode: "beam", beamWidth: 5 };
}

/** Textarea contents as the sentences list; one trailing newline is not
 * an extra sentence, interior blank lines pass through for the server
 * to echo back empty. */
export function splitSentences(text: string): string[] {
  if (text === "") return [];
  const lines = text.split("\n");
  if (lines[lines.length - 1] === "") lines.pop();
  return lines;
}

/**
 * The wire form of one submission. An ensemble of exactly one model
 * collapses to the single-model shape, so toggling ensemble on without
 * adding models changes nothing about the request.
 */
export function translateRequest(form: TranslateForm): TranslateRequest {
  const sentences = splitSentences(form.text);
  if (form.ensemble && form.models.length > 1) {
    return {
      ensemble: [...form.models],
      sentences,
      mode: form.mode,
      beam_width: form.beamWidth,
    };
  }
  return {
    model: form.models[0],
    sentences,
    mode: form.mode,
    beam_width: form.beamWidth,
  };
}

export function canTranslate(form: TranslateForm): boolean {
  if (form.models.length === 0) return false;
  if (!form.ensemble && form.models.length !== 1) return false;
  const sentences = splitSentences(form.text);
  return sentences.some((s) => s.trim() !== "");
}

export interface HistoryEntry {
  request: TranslateRequest;
  pending: boolean;
  translations: string[] | null;
  logprobs: number[] | null;
  errorCode: string | null;
  errorMessage: string | null;
}

/** In-flight submissions are serialized: each task starts only after
 * the previous one settled, failures included. */
export class SubmitQueue {
  private chain: Promise<void> = Promise.resolve();

  push<T>(task: () => Promise<T>): Promise<T> {
    const result = this.chain.then(task);
    this.chain = result.then(
      () => undefined,
      () => undefined,
    );
    return result;
  }
}

/** Submission history plus the queue that feeds it, newest entry first. */
export class TranslateLog {
  entries: HistoryEntry[] = [];
  private queue = new SubmitQueue();

  constructor(
    private client: Client,
    private onChange: () => void = () => {},
  ) {}

  submit(form: TranslateForm): Promise<void> {
    const entry: HistoryEntry = {
      request: translateRequest(form),
      pending: true,
      translations: null,
      logprobs: null,
      errorCode: null,
      errorMessage: null,
    };
    this.entries.unshift(entry);
    this.onChange();
    return this.queue.push(async () => {
      try {
        const res = await this.client.translate(entry.request);
        entry.translations = res.translations;
        entry.logprobs = res.logprobs;
      } catch (err) {
        if (err instanceof ServiceError) {
          entry.errorCode = err.code;
          entry.errorMessage = err.message;
        } else {
          entry.errorCode = "client_error";
          entry.errorMessage = String(err);
        }
      } finally {
        entry.pending = false;
        this.onChange();
      }
    });
  }
}
