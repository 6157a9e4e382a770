/**
 * Typed client for the judge's HTTP+JSON API.
 *
 * Every number shown anywhere in the UI comes out of these responses as-is;
 * the client never derives EDP, rankings, or verdicts on its own.
 */

export interface ProblemSummary {
  id: string;
  title: string;
  time_limit: number;
  memory_limit: number;
  output_limit: number;
  checker_mode: string;
  goodness_label: string | null;
  test_case_count: number;
}

export interface ProblemDetail extends ProblemSummary {
  statement: string;
  input_spec: string;
  output_spec: string;
}

export interface ResultView {
  verdict: string;
  goodness: number | null;
  time?: number;
  energy?: number;
  edp?: number;
  failed_test_index?: number;
  compile_log?: string;
}

export interface SubmissionView {
  id: number;
  problem_id: string;
  username: string;
  filename: string;
  status: string;
  visibility?: string;
  submitted_at?: string;
  result: ResultView | null;
}

export interface SubmitReply {
  id: number;
  status: string;
  queue_position?: number;
  compile: { ok: boolean; diagnostics: string };
}

export interface HighscoreRow {
  username: string;
  time: number;
  energy: number;
  edp: number;
  filename: string;
  submission_id: number;
  goodness?: number | null;
}

export interface HighscoreTable {
  problem_id: string;
  scope: string;
  group_name: string | null;
  sort: SortKey;
  goodness_label: string | null;
  entries: HighscoreRow[];
}

export interface GroupView {
  id: number;
  name: string;
  owner_id: number;
  visibility: string;
  problem_ids: string[];
  joined?: boolean;
}

export type SortKey = "time" | "energy" | "edp";

export class ApiError extends Error {
  constructor(
    public status: number,
    public code: string,
    message: string,
  ) {
    super(message);
  }
}

type FetchLike = (input: string, init?: RequestInit) => Promise<Response>;

export class ApiClient {
  private token: string | null = null;
  onUnauthorized: (() => void) | null = null;

  constructor(
    private base: string = "",
    private fetchFn: FetchLike = (input, init) => fetch(input, init),
  ) {}

  setToken(token: string | null): void {
    this.token = token;
  }

  private headers(extra?: Record<string, string>): Record<string, string> {
    const headers: Record<string, string> = { ...extra };
    if (this.token) headers["Authorization"] = `Bearer ${this.token}`;
    return headers;
  }

  private async request<T>(path: string, init: RequestInit = {}): Promise<T> {
    const resp = await this.fetchFn(`${this.base}${path}`, init);
    if (resp.status === 401) {
      if (this.onUnauthorized) this.onUnauthorized();
      const body = await resp.json().catch(() => null);
      throw new ApiError(401, "unauthorized", body?.error?.message ?? "not signed in");
    }
    if (resp.status === 204) return undefined as T;
    const body = await resp.json().catch(() => null);
    if (!resp.ok) {
      const err = body?.error ?? {};
      throw new ApiError(resp.status, err.code ?? "error", err.message ?? resp.statusText);
    }
    return body as T;
  }

  private json<T>(path: string, method: string, payload: unknown): Promise<T> {
    return this.request<T>(path, {
      method,
      headers: this.headers({ "Content-Type": "application/json" }),
      body: JSON.stringify(payload),
    });
  }

  // -- auth ------------------------------------------------------------

  register(username: string, password: string): Promise<{ id: number; username: string }> {
    return this.json("/users", "POST", { username, password });
  }

  async login(username: string, password: string): Promise<{ token: string; username: string }> {
    const reply = await this.json<{ token: string; username: string }>("/sessions", "POST", {
      username,
      password,
    });
    this.setToken(reply.token);
    return reply;
  }

  async logout(): Promise<void> {
    try {
      await this.request<void>("/sessions/current", {
        method: "DELETE",
        headers: this.headers(),
      });
    } finally {
      this.setToken(null);
    }
  }

  // -- problems -----------------------------------------------------------

  async listProblems(): Promise<ProblemSummary[]> {
    const body = await this.request<{ problems: ProblemSummary[] }>("/problems", {
      headers: this.headers(),
    });
    return body.problems;
  }

  getProblem(id: string): Promise<ProblemDetail> {
    return this.request(`/problems/${encodeURIComponent(id)}`, { headers: this.headers() });
  }

  // -- submissions ------------------------------------------------------------

  upload(problemId: string, file: File, toolchain: string): Promise<SubmitReply> {
    const form = new FormData();
    form.append("file", file);
    form.append("toolchain", toolchain);
    return this.request(`/problems/${encodeURIComponent(problemId)}/submissions`, {
      method: "POST",
      headers: this.headers(),
      body: form,
    });
  }

  getSubmission(id: number): Promise<SubmissionView> {
    return this.request(`/submissions/${id}`, { headers: this.headers() });
  }

  setVisibility(id: number, visibility: "public" | "private"): Promise<SubmissionView> {
    return this.json(`/submissions/${id}`, "PATCH", { visibility });
  }

  async mySubmissions(problemId: string): Promise<SubmissionView[]> {
    const body = await this.request<{ submissions: SubmissionView[] }>(
      `/problems/${encodeURIComponent(problemId)}/submissions/mine`,
      { headers: this.headers() },
    );
    return body.submissions;
  }

  // -- highscores ----------------------------------------------------------------

  highscores(problemId: string, scope: string, sort: SortKey, limit = 50): Promise<HighscoreTable> {
    const params = new URLSearchParams({ scope, sort, limit: String(limit) });
    return this.request(`/problems/${encodeURIComponent(problemId)}/highscores?${params}`, {
      headers: this.headers(),
    });
  }

  // -- groups ---------------------------------------------------------------------

  async listGroups(): Promise<GroupView[]> {
    const body = await this.request<{ groups: GroupView[] }>("/groups", {
      headers: this.headers(),
    });
    return body.groups;
  }

  createGroup(name: string, visibility: string, problemIds: string[]): Promise<GroupView> {
    return this.json("/groups", "POST", {
      name,
      visibility,
      problem_ids: problemIds,
    });
  }

  joinGroup(groupId: number): Promise<{ joined: boolean }> {
    return this.json(`/groups/${groupId}/members`, "POST", {});
  }
}
