// Live event stream consumer. The stream endpoint sits behind bearer auth,
// which the browser EventSource cannot send, so this reads the SSE body
// through fetch instead and handles resume itself: on any disconnect it
// reconnects with ?cursor=<last seq> so no event is lost, and it reports a
// "stale" status while the gap lasts (the UI shows a staleness banner).

import type { FetchLike } from "./api.js";
import { SseDecoder } from "./sse.js";
import type { StreamEnvelope } from "./types.js";

export type StreamStatus = "idle" | "connecting" | "live" | "stale" | "stopped";

export interface StreamOptions {
  fetchImpl: FetchLike;
  authHeaders: () => Record<string, string>;
  onEnvelope: (env: StreamEnvelope) => void;
  onStatus?: (status: StreamStatus) => void;
  topics?: string[];
  reconnectDelayMs?: number;
  maxDelayMs?: number;
  // test hook; defaults to real timers
  sleep?: (ms: number) => Promise<void>;
}

const defaultSleep = (ms: number) =>
  new Promise<void>((resolve) => setTimeout(resolve, ms));

export class EventStream {
  cursor = 0;
  status: StreamStatus = "idle";

  private readonly baseUrl: string;
  private readonly opts: StreamOptions;
  private running = false;
  private controller: AbortController | null = null;
  private retryMs: number;
  private loop: Promise<void> | null = null;

  constructor(baseUrl: string, opts: StreamOptions) {
    this.baseUrl = baseUrl.replace(/\/+$/, "");
    this.opts = opts;
    this.retryMs = opts.reconnectDelayMs ?? 1000;
  }

  start(): void {
    if (this.running) return;
    this.running = true;
    this.loop = this.run();
  }

  async stop(): Promise<void> {
    this.running = false;
    this.controller?.abort();
    this.setStatus("stopped");
    if (this.loop) await this.loop.catch(() => undefined);
  }

  private setStatus(status: StreamStatus): void {
    if (this.status === status) return;
    this.status = status;
    this.opts.onStatus?.(status);
  }

  private url(): string {
    const q = new URLSearchParams();
    if (this.cursor > 0) q.set("cursor", String(this.cursor));
    if (this.opts.topics && this.opts.topics.length > 0) {
      q.set("topics", this.opts.topics.join(","));
    }
    const qs = q.toString();
    return `${this.baseUrl}/api/stream${qs ? `?${qs}` : ""}`;
  }

  private async run(): Promise<void> {
    const base = this.opts.reconnectDelayMs ?? 1000;
    const max = this.opts.maxDelayMs ?? 30000;
    const sleep = this.opts.sleep ?? defaultSleep;
    let first = true;
    while (this.running) {
      if (!first) {
        this.setStatus("stale");
        await sleep(this.retryMs);
        this.retryMs = Math.min(this.retryMs * 2, max);
        if (!this.running) break;
      }
      first = false;
      this.setStatus("connecting");
      try {
        await this.consumeOnce();
        this.retryMs = base; // clean close; reconnect promptly
      } catch {
        // fall through to the backoff above
      }
    }
    this.setStatus("stopped");
  }

  private async consumeOnce(): Promise<void> {
    this.controller = new AbortController();
    const res = await this.opts.fetchImpl(this.url(), {
      headers: { accept: "text/event-stream", ...this.opts.authHeaders() },
      signal: this.controller.signal,
    });
    if (!res.ok || !res.body) {
      throw new Error(`stream refused: ${res.status}`);
    }
    const reader = res.body.getReader();
    const decoder = new SseDecoder();
    const text = new TextDecoder();
    try {
      for (;;) {
        const { done, value } = await reader.read();
        if (done) break;
        if (!this.running) break;
        for (const frame of decoder.push(text.decode(value, { stream: true }))) {
          if (frame.retryMs !== null) this.retryMs = frame.retryMs;
          if (!frame.data) continue;
          this.setStatus("live");
          const env = JSON.parse(frame.data) as StreamEnvelope;
          if (frame.id && /^\d+$/.test(frame.id)) this.cursor = Number(frame.id);
          else this.cursor = env.seq;
          if (env.type === "stream.slow_consumer") {
            // the buffer overflowed server-side; resubscribe from the cursor
            throw new Error("slow consumer, resubscribing");
          }
          this.opts.onEnvelope(env);
        }
      }
    } finally {
      reader.cancel().catch(() => undefined);
    }
  }
}
