// Session controller: one logged-in gardener per tab. Owns the API client,
// the live stream, the folded store, and the local view state; the DOM
// layer renders from here and calls back into the action methods.

import { ApiClient, ApiError, type FetchLike } from "./api.js";
import { GardenStore } from "./store.js";
import { EventStream, type StreamStatus } from "./stream.js";
import type {
  FieldResponse,
  Mode,
  SnapshotRefs,
  SubmitReceipt,
  TaskBody,
} from "./types.js";
import {
  availableActions,
  describeFinding,
  errorMessage,
  ViewState,
  type ActionAvailability,
  type FindingView,
} from "./views.js";

export interface SubmitOutcome {
  ok: boolean;
  receipt?: SubmitReceipt;
  // Manual mode: soft-rule violations arrive here instead of rejecting
  warnings: FindingView[];
  rejection?: { message: string; reasons: FindingView[] };
  // true when a tap was swallowed client-side (no network request)
  deduped?: boolean;
}

export interface AppOptions {
  baseUrl?: string;
  fetchImpl?: FetchLike;
  reconnectDelayMs?: number;
  sleep?: (ms: number) => Promise<void>;
}

export class GardenApp {
  readonly api: ApiClient;
  readonly store = new GardenStore();
  readonly view = new ViewState();
  streamStatus: StreamStatus = "idle";
  snapshot: SnapshotRefs | null = null;
  onChange: (() => void) | null = null;

  private readonly opts: AppOptions;
  private readonly fetchImpl: FetchLike;
  private stream: EventStream | null = null;
  private waterAllInFlight = false;

  constructor(opts: AppOptions = {}) {
    this.opts = opts;
    this.fetchImpl = opts.fetchImpl ?? ((url, init) => globalThis.fetch(url, init));
    this.api = new ApiClient(opts.baseUrl ?? "", this.fetchImpl);
  }

  private changed(): void {
    this.onChange?.();
  }

  // -- session -----------------------------------------------------------

  async login(userId: string, password: string): Promise<void> {
    const session = await this.api.login(userId, password);
    this.store.session = {
      user_id: session.user_id,
      display_name: session.display_name,
      plot_id: session.plot_id,
      mode: session.mode,
    };
    await this.refresh();
    this.stream = new EventStream(this.api.baseUrl, {
      fetchImpl: this.fetchImpl,
      authHeaders: () => this.api.authHeaders(),
      onEnvelope: (env) => {
        this.store.apply(env);
        this.changed();
      },
      onStatus: (status) => {
        this.streamStatus = status;
        this.changed();
      },
      reconnectDelayMs: this.opts.reconnectDelayMs,
      sleep: this.opts.sleep,
    });
    this.stream.start();
    this.changed();
  }

  async logout(): Promise<void> {
    await this.stream?.stop();
    this.stream = null;
    await this.api.logout();
    this.store.session = null;
    this.changed();
  }

  // Snapshot seeding; also what a reload runs before re-attaching the
  // stream, so the view is a pure function of snapshots + deltas.
  async refresh(): Promise<void> {
    const [users, field, queue, timeline, chat] = await Promise.all([
      this.api.users(),
      this.api.field({ style: this.view.style }),
      this.api.queue(),
      this.api.timeline({ limit: 1000 }),
      this.api.chat(0, 1000),
    ]);
    this.store.seedUsers(users);
    this.store.seedField(field);
    this.store.seedQueue(queue);
    this.store.seedTimeline(timeline);
    this.store.seedChat(chat);
    this.snapshot = field.snapshot;
    this.changed();
  }

  // -- actions -----------------------------------------------------------

  actions(): ActionAvailability {
    const mode: Mode = this.store.session?.mode ?? "hybrid";
    return availableActions(mode);
  }

  placeSeed(species: string, target?: [number, number]): Promise<SubmitOutcome> {
    const body: TaskBody = target
      ? { kind: "sow", species, target }
      : { kind: "sow", species };
    return this.submit(body);
  }

  waterPlants(plantIds: string[]): Promise<SubmitOutcome> {
    return this.submit({ kind: "water", plant_ids: plantIds });
  }

  // One outstanding Water All at a time: the button stays disabled until
  // the server acknowledges, so rapid taps cost exactly one request.
  async waterAll(): Promise<SubmitOutcome> {
    if (this.waterAllInFlight) {
      return { ok: false, warnings: [], deduped: true };
    }
    const plotId = this.store.session?.plot_id;
    if (!plotId) return { ok: false, warnings: [], deduped: true };
    this.waterAllInFlight = true;
    this.changed();
    try {
      return await this.submit({ kind: "water", all_in_plot: plotId });
    } finally {
      this.waterAllInFlight = false;
      this.changed();
    }
  }

  get waterAllDisabled(): boolean {
    return this.waterAllInFlight;
  }

  weedAt(target: [number, number]): Promise<SubmitOutcome> {
    return this.submit({ kind: "weed", target });
  }

  moistureReadAt(target: [number, number]): Promise<SubmitOutcome> {
    return this.submit({ kind: "moisture_read", target });
  }

  scanPlot(plotId?: string): Promise<SubmitOutcome> {
    return this.submit({ kind: "scan", plot_id: plotId });
  }

  private async submit(body: TaskBody): Promise<SubmitOutcome> {
    try {
      const receipt = await this.api.submitTask(body);
      return {
        ok: true,
        receipt,
        warnings: receipt.findings.map(describeFinding),
      };
    } catch (err) {
      if (err instanceof ApiError) {
        const findings = Array.isArray(err.details["findings"])
          ? (err.details["findings"] as never[]).map(describeFinding)
          : [];
        return {
          ok: false,
          warnings: [],
          rejection: { message: errorMessage(err), reasons: findings },
        };
      }
      throw err;
    }
  }

  async cancelTask(taskId: string): Promise<void> {
    await this.api.cancelTask(taskId);
  }

  async switchMode(mode: Mode): Promise<void> {
    const result = await this.api.setMode(mode);
    // reflect immediately; the stream's mode.switch echo is idempotent
    this.store.modes.set(result.user_id, result.new);
    if (this.store.session) {
      this.store.session = { ...this.store.session, mode: result.new };
    }
    this.changed();
  }

  async postChat(message: string): Promise<void> {
    await this.api.postChat(message);
  }

  // -- field view --------------------------------------------------------

  async toggleStyle(): Promise<SnapshotRefs> {
    this.view.toggleStyle();
    const field = await this.api.field({ style: this.view.style });
    this.snapshot = field.snapshot;
    this.changed();
    return field.snapshot;
  }

  fieldView(): {
    plots: FieldResponse["plots"];
    circles: ReturnType<GardenStore["plantCircles"]>;
    weeds: typeof this.store.weeds;
    style: string;
    snapshot: SnapshotRefs | null;
    stale: boolean;
  } {
    const plotId =
      this.view.scope === "plot" ? this.store.session?.plot_id : undefined;
    return {
      plots: this.store.plots,
      circles: this.store.plantCircles(plotId),
      weeds: this.store.weeds,
      style: this.view.style,
      snapshot: this.snapshot,
      stale: this.streamStatus === "stale",
    };
  }
}
