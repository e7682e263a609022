// Thin typed client over the gardenbot REST surface. Every mutation in the
// UI round-trips through here; nothing is decided client-side.

import type {
  ChatMessage,
  ErrorPayload,
  FieldResponse,
  LoginSession,
  Mode,
  ModeSwitchResult,
  QueueRow,
  SubmitReceipt,
  TaskBody,
  TimelapseIndex,
  TimelineEvent,
  TimelineFilter,
  UserProfile,
  WeatherView,
} from "./types.js";

export type FetchLike = (url: string, init?: RequestInit) => Promise<Response>;

export class ApiError extends Error {
  readonly status: number;
  readonly code: number;
  readonly kind: string;
  readonly details: Record<string, unknown>;

  constructor(status: number, payload: ErrorPayload) {
    super(payload.message);
    this.name = "ApiError";
    this.status = status;
    this.code = payload.code;
    this.kind = payload.error;
    this.details = payload.details ?? {};
  }
}

function defaultFetch(): FetchLike {
  return (url, init) => globalThis.fetch(url, init);
}

export class ApiClient {
  readonly baseUrl: string;
  private readonly fetchImpl: FetchLike;
  private token: string | null = null;

  constructor(baseUrl = "", fetchImpl?: FetchLike) {
    this.baseUrl = baseUrl.replace(/\/+$/, "");
    this.fetchImpl = fetchImpl ?? defaultFetch();
  }

  get authToken(): string | null {
    return this.token;
  }

  authHeaders(): Record<string, string> {
    return this.token ? { authorization: `Bearer ${this.token}` } : {};
  }

  private async request<T>(
    method: string,
    path: string,
    body?: unknown,
  ): Promise<T> {
    const headers: Record<string, string> = { ...this.authHeaders() };
    const init: RequestInit = { method, headers };
    if (body !== undefined) {
      headers["content-type"] = "application/json";
      init.body = JSON.stringify(body);
    }
    const res = await this.fetchImpl(this.baseUrl + path, init);
    if (!res.ok) {
      let payload: ErrorPayload;
      try {
        payload = ((await res.json()) as { error: ErrorPayload }).error;
      } catch {
        payload = {
          code: 0,
          error: "HttpError",
          message: `${res.status} ${res.statusText}`,
          details: {},
        };
      }
      throw new ApiError(res.status, payload);
    }
    return (await res.json()) as T;
  }

  async login(userId: string, password: string): Promise<LoginSession> {
    const session = await this.request<LoginSession>("POST", "/api/login", {
      user_id: userId,
      password,
    });
    this.token = session.token;
    return session;
  }

  async logout(): Promise<void> {
    await this.request("POST", "/api/logout", {});
    this.token = null;
  }

  me(): Promise<UserProfile> {
    return this.request("GET", "/api/me");
  }

  async users(): Promise<UserProfile[]> {
    const doc = await this.request<{ users: UserProfile[] }>(
      "GET",
      "/api/users",
    );
    return doc.users;
  }

  field(opts: {
    scope?: "global" | "plot";
    plotId?: string;
    style?: "abstract" | "photo_grid";
  } = {}): Promise<FieldResponse> {
    const q = new URLSearchParams();
    if (opts.scope) q.set("scope", opts.scope);
    if (opts.plotId) q.set("plot_id", opts.plotId);
    if (opts.style) q.set("style", opts.style);
    const qs = q.toString();
    return this.request("GET", `/api/field${qs ? `?${qs}` : ""}`);
  }

  submitTask(body: TaskBody): Promise<SubmitReceipt> {
    return this.request("POST", "/api/tasks", body);
  }

  async queue(): Promise<QueueRow[]> {
    const doc = await this.request<{ entries: QueueRow[] }>(
      "GET",
      "/api/queue",
    );
    return doc.entries;
  }

  task(taskId: string): Promise<Record<string, unknown>> {
    return this.request("GET", `/api/tasks/${taskId}`);
  }

  cancelTask(taskId: string): Promise<{ task_id: string; state: string }> {
    return this.request("DELETE", `/api/tasks/${taskId}`);
  }

  setMode(mode: Mode): Promise<ModeSwitchResult> {
    return this.request("POST", "/api/mode", { mode });
  }

  async timeline(filter: TimelineFilter = {}): Promise<TimelineEvent[]> {
    const q = new URLSearchParams();
    for (const [key, value] of Object.entries(filter)) {
      if (value !== undefined) q.set(key, String(value));
    }
    const qs = q.toString();
    const doc = await this.request<{ events: TimelineEvent[] }>(
      "GET",
      `/api/timeline${qs ? `?${qs}` : ""}`,
    );
    return doc.events;
  }

  async chat(afterId = 0, limit = 100): Promise<ChatMessage[]> {
    const doc = await this.request<{ messages: ChatMessage[] }>(
      "GET",
      `/api/chat?after_id=${afterId}&limit=${limit}`,
    );
    return doc.messages;
  }

  postChat(message: string): Promise<ChatMessage> {
    return this.request("POST", "/api/chat", { message });
  }

  postFeedback(message: string): Promise<TimelineEvent> {
    return this.request("POST", "/api/feedback", { message });
  }

  weather(): Promise<WeatherView> {
    return this.request("GET", "/api/weather");
  }

  timelapseIndex(): Promise<TimelapseIndex> {
    return this.request("GET", "/api/timelapse");
  }

  // Frame PNGs sit behind the same bearer auth as everything else, so an
  // <img src> cannot load them directly; fetch the bytes and object-URL them.
  async fetchFrame(ref: string): Promise<Blob> {
    const res = await this.fetchImpl(this.baseUrl + ref, {
      headers: this.authHeaders(),
    });
    if (!res.ok) {
      throw new ApiError(res.status, {
        code: 0,
        error: "HttpError",
        message: `frame fetch failed: ${res.status}`,
        details: { ref },
      });
    }
    return res.blob();
  }
}
