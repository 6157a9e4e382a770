/**
 * Submission status polling: every 2 s, backing off after the first minute,
 * and stopping for good once the submission is finalized.
 */

import { ApiClient, SubmissionView } from "./api.js";

export const POLL_INTERVAL_MS = 2000;
export const BACKOFF_AFTER_MS = 60_000;
export const MAX_INTERVAL_MS = 15_000;

const FINAL_STATUSES = new Set(["done", "failed"]);

export function isFinal(status: string): boolean {
  return FINAL_STATUSES.has(status);
}

export class SubmissionPoller {
  private timer: ReturnType<typeof setTimeout> | null = null;
  private startedAt = 0;
  private interval = POLL_INTERVAL_MS;
  private stopped = false;

  constructor(
    private api: ApiClient,
    private submissionId: number,
    private onUpdate: (view: SubmissionView) => void,
    private onError: (err: unknown) => void = () => {},
  ) {}

  start(): void {
    this.startedAt = Date.now();
    this.interval = POLL_INTERVAL_MS;
    this.stopped = false;
    this.schedule();
  }

  stop(): void {
    this.stopped = true;
    if (this.timer !== null) {
      clearTimeout(this.timer);
      this.timer = null;
    }
  }

  get running(): boolean {
    return !this.stopped && this.timer !== null;
  }

  private schedule(): void {
    if (this.stopped) return;
    this.timer = setTimeout(() => void this.tick(), this.interval);
  }

  private async tick(): Promise<void> {
    if (this.stopped) return;
    let view: SubmissionView;
    try {
      view = await this.api.getSubmission(this.submissionId);
    } catch (err) {
      this.onError(err);
      this.bumpInterval();
      this.schedule();
      return;
    }
    this.onUpdate(view);
    if (isFinal(view.status)) {
      this.stop();
      return;
    }
    this.bumpInterval();
    this.schedule();
  }

  private bumpInterval(): void {
    if (Date.now() - this.startedAt >= BACKOFF_AFTER_MS) {
      this.interval = Math.min(this.interval * 1.5, MAX_INTERVAL_MS);
    }
  }
}
