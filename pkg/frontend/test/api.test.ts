import { beforeEach, describe, expect, it } from "vitest";

import { ApiClient, ApiError } from "../src/api.js";
import { FakeServer } from "./fakeServer.js";

describe("ApiClient", () => {
  let server: FakeServer;
  let api: ApiClient;

  beforeEach(() => {
    server = new FakeServer();
    api = new ApiClient("", server.fetch);
  });

  it("logs in and sends the bearer token afterwards", async () => {
    const reply = await api.login("alice", "demo-pass");
    expect(reply.username).toBe("alice");
    const subs = await api.mySubmissions("sum");
    expect(subs.map((s) => s.filename)).toEqual(["sum_fast.c"]);
  });

  it("maps error envelopes to ApiError", async () => {
    await expect(api.login("alice", "wrong")).rejects.toThrowError(ApiError);
    try {
      await api.getProblem("ghost");
    } catch (err) {
      expect(err).toBeInstanceOf(ApiError);
      expect((err as ApiError).status).toBe(404);
      expect((err as ApiError).code).toBe("not_found");
    }
  });

  it("fires onUnauthorized on 401", async () => {
    let fired = 0;
    api.onUnauthorized = () => (fired += 1);
    await expect(api.mySubmissions("sum")).rejects.toThrowError();
    expect(fired).toBe(1);
  });

  it("fetches highscores with scope and sort parameters", async () => {
    const table = await api.highscores("sum", "group:1", "time", 10);
    expect(table.group_name).toBe("demo-course");
    expect(server.requests.at(-1)).toContain("scope=group%3A1");
    expect(server.requests.at(-1)).toContain("sort=time");
  });

  it("uploads multipart form data", async () => {
    await api.login("alice", "demo-pass");
    const file = new File([new TextEncoder().encode("int main(){}")], "fresh.c");
    const reply = await api.upload("sum", file, "c-gcc");
    expect(reply.status).toBe("queued");
    expect(reply.compile.ok).toBe(true);
  });

  it("logout clears the token even when the request fails", async () => {
    await api.login("alice", "demo-pass");
    await api.logout();
    await expect(api.mySubmissions("sum")).rejects.toThrowError();
  });
});
