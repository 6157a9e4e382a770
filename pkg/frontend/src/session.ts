/** Client session: token + username, persisted across reloads, cleared on 401. */

import { ApiClient } from "./api.js";

const STORAGE_KEY = "cmb-session";

export interface SessionState {
  token: string;
  username: string;
}

type Listener = (state: SessionState | null) => void;

export class ClientSession {
  private state: SessionState | null = null;
  private listeners: Listener[] = [];

  constructor(
    private api: ApiClient,
    private storage: Storage = window.localStorage,
  ) {
    api.onUnauthorized = () => this.clear();
    const raw = this.storage.getItem(STORAGE_KEY);
    if (raw) {
      try {
        this.state = JSON.parse(raw) as SessionState;
        api.setToken(this.state.token);
      } catch {
        this.storage.removeItem(STORAGE_KEY);
      }
    }
  }

  get current(): SessionState | null {
    return this.state;
  }

  get username(): string | null {
    return this.state?.username ?? null;
  }

  get signedIn(): boolean {
    return this.state !== null;
  }

  onChange(listener: Listener): void {
    this.listeners.push(listener);
  }

  private notify(): void {
    for (const listener of this.listeners) listener(this.state);
  }

  async login(username: string, password: string): Promise<void> {
    const reply = await this.api.login(username, password);
    this.state = { token: reply.token, username: reply.username };
    this.storage.setItem(STORAGE_KEY, JSON.stringify(this.state));
    this.notify();
  }

  async logout(): Promise<void> {
    try {
      await this.api.logout();
    } finally {
      this.clear();
    }
  }

  clear(): void {
    if (this.state === null) return;
    this.state = null;
    this.api.setToken(null);
    this.storage.removeItem(STORAGE_KEY);
    this.notify();
  }
}
