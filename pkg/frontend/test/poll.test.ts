import { afterEach, beforeEach, describe, expect, it, vi } from "vitest";

import { ApiClient, SubmissionView } from "../src/api.js";
import { POLL_INTERVAL_MS, SubmissionPoller, isFinal } from "../src/poll.js";

function clientWithStatuses(statuses: string[]): { api: ApiClient; calls: () => number } {
  let i = 0;
  const fetchFn = async (url: string): Promise<Response> => {
    const status = statuses[Math.min(i, statuses.length - 1)];
    i += 1;
    const body: SubmissionView = {
      id: 1,
      problem_id: "sum",
      username: "alice",
      filename: "a.c",
      status,
      result: status === "done" ? { verdict: "accepted", goodness: null } : null,
    };
    return new Response(JSON.stringify(body), { status: 200 });
  };
  return { api: new ApiClient("", fetchFn), calls: () => i };
}

describe("SubmissionPoller", () => {
  beforeEach(() => vi.useFakeTimers());
  afterEach(() => vi.useRealTimers());

  it("polls at 2 s intervals and stops once finalized", async () => {
    const { api, calls } = clientWithStatuses(["queued", "running", "done"]);
    const seen: string[] = [];
    const poller = new SubmissionPoller(api, 1, (v) => seen.push(v.status));
    poller.start();

    await vi.advanceTimersByTimeAsync(POLL_INTERVAL_MS * 3 + 50);
    expect(seen).toEqual(["queued", "running", "done"]);
    const after = calls();
    await vi.advanceTimersByTimeAsync(POLL_INTERVAL_MS * 10);
    expect(calls()).toBe(after); // no more requests after done
    expect(poller.running).toBe(false);
  });

  it("backs off after the first minute", async () => {
    const { api, calls } = clientWithStatuses(["queued"]);
    const poller = new SubmissionPoller(api, 1, () => {});
    poller.start();

    await vi.advanceTimersByTimeAsync(60_000);
    const inFirstMinute = calls();
    expect(inFirstMinute).toBe(30); // every 2 s
    await vi.advanceTimersByTimeAsync(60_000);
    const inSecondMinute = calls() - inFirstMinute;
    expect(inSecondMinute).toBeLessThan(30);
    poller.stop();
  });

  it("keeps polling through transient errors", async () => {
    let fail = true;
    const fetchFn = async (): Promise<Response> => {
      if (fail) {
        fail = false;
        return new Response(JSON.stringify({ error: { code: "internal", message: "x" } }), {
          status: 500,
        });
      }
      return new Response(
        JSON.stringify({
          id: 1,
          problem_id: "sum",
          username: "a",
          filename: "f",
          status: "done",
          result: { verdict: "accepted", goodness: null },
        }),
        { status: 200 },
      );
    };
    const api = new ApiClient("", fetchFn);
    const errors: unknown[] = [];
    const seen: string[] = [];
    const poller = new SubmissionPoller(api, 1, (v) => seen.push(v.status), (e) => errors.push(e));
    poller.start();
    await vi.advanceTimersByTimeAsync(POLL_INTERVAL_MS * 3 + 50);
    expect(errors.length).toBe(1);
    expect(seen).toEqual(["done"]);
  });

  it("stop() cancels a pending tick", async () => {
    const { api, calls } = clientWithStatuses(["queued"]);
    const poller = new SubmissionPoller(api, 1, () => {});
    poller.start();
    poller.stop();
    await vi.advanceTimersByTimeAsync(POLL_INTERVAL_MS * 5);
    expect(calls()).toBe(0);
  });
});

it("isFinal", () => {
  expect(isFinal("done")).toBe(true);
  expect(isFinal("failed")).toBe(true);
  expect(isFinal("queued")).toBe(false);
  expect(isFinal("running")).toBe(false);
});
