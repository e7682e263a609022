// In-memory stand-in for the gardenbot service, mounted at the network
// boundary: a fetch-compatible handler plus a live SSE hub. It mirrors the
// documented REST and stream contracts closely enough for the UI loop to
// run against it, and it logs every request so tests can assert on the
// wire traffic.

import type { FetchLike } from "../src/api.js";
import type {
  ChatMessage,
  Finding,
  Mode,
  PlantDoc,
  PlotDoc,
  QueueRow,
  StreamEnvelope,
  TimelineEvent,
  UserProfile,
} from "../src/types.js";

export interface LoggedRequest {
  method: string;
  path: string;
  body: unknown;
}

interface FakeUser extends UserProfile {
  password: string;
}

interface FakeTask {
  taskId: string;
  userId: string;
  kind: string;
  body: Record<string, unknown>;
  state: "pending" | "executing" | "done" | "failed" | "cancelled";
  estimateS: number;
}

interface FakePlant {
  id: string;
  plotId: string;
  owner: string;
  speciesId: string;
  position: [number, number];
  state: string;
  radiusMm: number;
  sownDay: number;
  recentlyWatered: boolean;
}

const SPECIES_RADII: Record<string, number> = {
  lettuce: 150,
  radish: 75,
  cornflower: 100,
  marigold: 125,
  cumin: 80,
};

const AUTOMATED = new Set(["p05", "p07", "p09", "p10", "p17"]);
const MANUAL = new Set(["p01", "p12", "p15"]);
const FIELD_W = 6000;
const FIELD_H = 3000;
const PLOT = 1000;

const encoder = new TextEncoder();

function sseFrame(env: StreamEnvelope): Uint8Array {
  const body = JSON.stringify(env);
  return encoder.encode(`id: ${env.seq}\nevent: ${env.type}\ndata: ${body}\n\n`);
}

function json(status: number, doc: unknown): Response {
  return new Response(JSON.stringify(doc), {
    status,
    headers: { "content-type": "application/json" },
  });
}

function fail(
  status: number,
  error: string,
  message: string,
  details: Record<string, unknown> = {},
): Response {
  return json(status, { error: { code: 0, error, message, details } });
}

export class FakeGarden {
  log: LoggedRequest[] = [];
  completedDays = 0;

  private seq = 0;
  private buffer: StreamEnvelope[] = [];
  private listeners = new Set<(env: StreamEnvelope) => void>();
  private tokens = new Map<string, string>();
  private users = new Map<string, FakeUser>();
  private plots: PlotDoc[] = [];
  private tasks = new Map<string, FakeTask>();
  private order: string[] = [];
  private plants = new Map<string, FakePlant>();
  private weeds = new Map<string, { id: string; plotId: string; position: [number, number] }>();
  private timeline: TimelineEvent[] = [];
  private chat: ChatMessage[] = [];
  private nextTask = 1;
  private nextPlant = 1;
  private nextEvent = 1;
  private nextChat = 1;
  private waterAllHold: Promise<void> | null = null;
  private releaseHold: (() => void) | null = null;
  private streamClosers = new Set<() => void>();

  constructor() {
    for (let i = 1; i <= 18; i++) {
      const id = `p${String(i).padStart(2, "0")}`;
      const mode: Mode = AUTOMATED.has(id)
        ? "automated"
        : MANUAL.has(id)
          ? "manual"
          : "hybrid";
      this.users.set(id, {
        user_id: id,
        display_name: `Gardener ${i}`,
        plot_id: `plot-${String(i).padStart(2, "0")}`,
        mode,
        password: `pw-${id}`,
      });
    }
    let n = 1;
    for (let row = 0; row < 3; row++) {
      for (let col = 0; col < 6; col++) {
        this.plots.push({
          plot_id: `plot-${String(n).padStart(2, "0")}`,
          origin: [col * PLOT, row * PLOT],
          size_mm: PLOT,
          owner: `p${String(n).padStart(2, "0")}`,
        });
        n++;
      }
    }
  }

  readonly fetch: FetchLike = (url, init) => this.handle(url, init);

  // Holds the next Water All response open until released, so tests can
  // tap the button repeatedly while one request is genuinely in flight.
  gateWaterAll(): void {
    this.waterAllHold = new Promise((resolve) => {
      this.releaseHold = resolve;
    });
  }

  releaseWaterAll(): void {
    this.releaseHold?.();
    this.waterAllHold = null;
    this.releaseHold = null;
  }

  requestCount(match: (req: LoggedRequest) => boolean): number {
    return this.log.filter(match).length;
  }

  // -- stream hub --------------------------------------------------------

  private emit(type: string, data: Record<string, unknown>): void {
    const env: StreamEnvelope = {
      seq: ++this.seq,
      t: new Date(2025, 3, 1 + this.completedDays).toISOString(),
      type,
      data,
    };
    this.buffer.push(env);
    for (const push of [...this.listeners]) push(env);
  }

  // -- world control (what the robot/scheduler would do) -------------------

  drain(): void {
    for (const taskId of [...this.order]) {
      const task = this.tasks.get(taskId);
      if (!task || task.state !== "pending") continue;
      task.state = "executing";
      this.emit("queue.executing", {
        task_id: taskId,
        user_id: task.userId,
        kind: task.kind,
      });
      const result = this.execute(task);
      task.state = "done";
      this.order = this.order.filter((t) => t !== taskId);
      const event = this.record(task.userId, task.kind, {
        task_id: taskId,
        user_id: task.userId,
        origin: "user",
        state: "done",
        result,
      });
      this.emit("queue.done", {
        task_id: taskId,
        user_id: task.userId,
        kind: task.kind,
        timeline_event_id: event.id,
      });
    }
  }

  private execute(task: FakeTask): Record<string, unknown> {
    const user = this.users.get(task.userId);
    if (!user) return {};
    switch (task.kind) {
      case "sow": {
        const id = `plant-${String(this.nextPlant++).padStart(4, "0")}`;
        const plant: FakePlant = {
          id,
          plotId: user.plot_id,
          owner: task.userId,
          speciesId: task.body["species"] as string,
          position: task.body["target"] as [number, number],
          state: "sown",
          radiusMm: 2,
          sownDay: this.completedDays + 1,
          recentlyWatered: false,
        };
        this.plants.set(id, plant);
        this.emit("plant.created", this.plantDoc(plant));
        return { plant_id: id };
      }
      case "water": {
        const ids = (task.body["all_in_plot"] as string | undefined)
          ? [...this.plants.values()]
              .filter((p) => p.plotId === task.body["all_in_plot"])
              .map((p) => p.id)
          : ((task.body["plant_ids"] as string[]) ?? []);
        for (const pid of ids) {
          const plant = this.plants.get(pid);
          if (!plant) continue;
          plant.recentlyWatered = true;
          this.emit("plant.watered", { plant_id: pid, moisture: 0.5 });
        }
        return { watered: ids };
      }
      case "weed": {
        const target = task.body["target"] as [number, number];
        const cleared: string[] = [];
        for (const weed of [...this.weeds.values()]) {
          const dx = weed.position[0] - target[0];
          const dy = weed.position[1] - target[1];
          if (Math.hypot(dx, dy) <= 50) {
            this.weeds.delete(weed.id);
            cleared.push(weed.id);
          }
        }
        this.emit("weed.cleared", { weeds_cleared: cleared, plants_removed: [] });
        return { weeds_cleared: cleared };
      }
      default:
        return {};
    }
  }

  tickDay(): void {
    this.completedDays += 1;
    const growth: Record<string, unknown>[] = [];
    for (const plant of this.plants.values()) {
      plant.radiusMm += 5;
      const row: Record<string, unknown> = {
        plant_id: plant.id,
        radius_mm: plant.radiusMm,
      };
      if (plant.state === "sown" && this.completedDays - plant.sownDay >= 2) {
        plant.state = "germinated";
        row["event"] = "germinated";
      }
      growth.push(row);
    }
    const germinated = [...this.plants.values()].filter(
      (p) => p.state === "germinated",
    ).length;
    const rate = this.plants.size > 0 ? germinated / this.plants.size : 0;
    const event = this.record("robot", "day_complete", {
      day: this.completedDays,
    });
    this.emit("day.tick", {
      day: this.completedDays,
      weather: { raining: false },
      growth,
      germination_rate: rate,
      plants: [...this.plants.values()].map((p) => ({
        id: p.id,
        state: p.state,
        radius_mm: p.radiusMm,
      })),
      timeline_event_id: event.id,
    });
  }

  spawnWeed(plotId: string, position: [number, number]): void {
    const id = `weed-${this.weeds.size + 1}`;
    this.weeds.set(id, { id, plotId, position });
    this.record("robot", "system", {
      what: "weed_appeared",
      weed_id: id,
      plot_id: plotId,
      position,
    });
    this.emit("weed.spawned", { weed_id: id, plot_id: plotId, position });
  }

  private record(
    actor: string,
    kind: string,
    payload: Record<string, unknown>,
  ): TimelineEvent {
    const event: TimelineEvent = {
      id: this.nextEvent++,
      timestamp: new Date(2025, 3, 1 + this.completedDays).toISOString(),
      actor,
      kind,
      payload,
    };
    this.timeline.push(event);
    this.emit("timeline.event", { ...event });
    return event;
  }

  // -- request routing -----------------------------------------------------

  private async handle(url: string, init?: RequestInit): Promise<Response> {
    const parsed = new URL(url, "http://fake");
    const path = parsed.pathname;
    const method = (init?.method ?? "GET").toUpperCase();
    const body = init?.body ? (JSON.parse(init.body as string) as Record<string, unknown>) : undefined;
    this.log.push({ method, path, body });

    if (method === "POST" && path === "/api/login") {
      const userId = String(body?.["user_id"] ?? "");
      const user = this.users.get(userId);
      if (!user || body?.["password"] !== user.password) {
        return fail(401, "InvalidCredentials", "wrong user id or password");
      }
      const token = `tok-${userId}-${this.tokens.size + 1}`;
      this.tokens.set(token, userId);
      this.record(userId, "login", { user_id: userId });
      return json(200, { token, ...this.profile(user) });
    }

    const auth = this.resolve(init);
    if (!auth) return fail(401, "Unauthenticated", "missing bearer token");
    const me = this.users.get(auth);
    if (!me) return fail(401, "Unauthenticated", "unknown or expired session token");

    if (method === "POST" && path === "/api/logout") {
      return json(200, { ok: true, user_id: auth });
    }
    if (method === "GET" && path === "/api/me") {
      return json(200, this.profile(me));
    }
    if (method === "GET" && path === "/api/users") {
      return json(200, {
        users: [...this.users.values()].map((u) => this.profile(u)),
      });
    }
    if (method === "GET" && path === "/api/field") {
      return this.fieldResponse(parsed);
    }
    if (method === "POST" && path === "/api/tasks") {
      return this.submit(me, body ?? {});
    }
    if (method === "GET" && path === "/api/queue") {
      return json(200, { entries: this.queueRows() });
    }
    if (path.startsWith("/api/tasks/")) {
      const taskId = path.slice("/api/tasks/".length);
      const task = this.tasks.get(taskId);
      if (!task) return fail(404, "UnknownTask", `no task ${taskId}`);
      if (method === "DELETE") {
        if (task.state !== "pending") {
          return fail(409, "NotCancellable", "task already started");
        }
        task.state = "cancelled";
        this.order = this.order.filter((t) => t !== taskId);
        this.emit("queue.cancelled", { task_id: taskId, user_id: task.userId });
        return json(200, { task_id: taskId, state: "cancelled" });
      }
      return json(200, {
        task: { id: taskId, user_id: task.userId, kind: task.kind },
        state: task.state,
        estimate_s: task.estimateS,
      });
    }
    if (method === "POST" && path === "/api/mode") {
      const mode = body?.["mode"] as Mode;
      if (!["manual", "hybrid", "automated"].includes(mode)) {
        return fail(400, "GardenError", `unknown mode ${String(mode)}`);
      }
      const old = me.mode;
      me.mode = mode;
      const result = {
        user_id: me.user_id,
        old,
        new: mode,
        timestamp: new Date().toISOString(),
      };
      this.record(me.user_id, "mode_switch", { old, new: mode });
      this.emit("mode.switch", { user_id: me.user_id, old, new: mode });
      return json(200, result);
    }
    if (method === "GET" && path === "/api/timeline") {
      let events = this.timeline;
      const actor = parsed.searchParams.get("actor");
      const kind = parsed.searchParams.get("kind");
      if (actor) events = events.filter((e) => e.actor === actor);
      if (kind) events = events.filter((e) => e.kind === kind);
      const afterId = Number(parsed.searchParams.get("after_id") ?? 0);
      const limit = Number(parsed.searchParams.get("limit") ?? 100);
      events = events.filter((e) => e.id > afterId).slice(0, limit);
      return json(200, { events });
    }
    if (method === "GET" && path === "/api/chat") {
      return json(200, { messages: this.chat });
    }
    if (method === "POST" && path === "/api/chat") {
      const msg: ChatMessage = {
        id: this.nextChat++,
        user_id: auth,
        message: String(body?.["message"] ?? ""),
        timestamp: new Date().toISOString(),
      };
      this.chat.push(msg);
      this.emit("chat.message", { ...msg });
      return json(200, msg);
    }
    if (method === "POST" && path === "/api/feedback") {
      const event = this.record(auth, "system", {
        what: "feedback",
        message: String(body?.["message"] ?? ""),
      });
      return json(200, event);
    }
    if (method === "GET" && path === "/api/weather") {
      return json(200, { now: { raining: false, temperature_c: 18 }, forecast: [] });
    }
    if (method === "GET" && path === "/api/timelapse") {
      return json(200, { perspectives: ["topdown", "side_ew", "side_ns"], days: [] });
    }
    if (method === "GET" && path.startsWith("/api/timelapse/")) {
      // one transparent pixel; enough for an <img> to load
      const pixel = Uint8Array.from([137, 80, 78, 71, 13, 10, 26, 10]);
      return new Response(pixel, { status: 200, headers: { "content-type": "image/png" } });
    }
    if (method === "GET" && path === "/api/stream") {
      return this.streamResponse(parsed, init);
    }
    return fail(404, "GardenError", `no route ${method} ${path}`);
  }

  private resolve(init?: RequestInit): string | null {
    const headers = (init?.headers ?? {}) as Record<string, string>;
    const header = headers["authorization"] ?? headers["Authorization"] ?? "";
    if (!header.toLowerCase().startsWith("bearer ")) return null;
    return this.tokens.get(header.slice(7).trim()) ?? null;
  }

  private profile(user: FakeUser): UserProfile {
    return {
      user_id: user.user_id,
      display_name: user.display_name,
      plot_id: user.plot_id,
      mode: user.mode,
    };
  }

  private plantDoc(plant: FakePlant): Record<string, unknown> {
    const doc: PlantDoc = {
      id: plant.id,
      plot_id: plant.plotId,
      owner: plant.owner,
      species_id: plant.speciesId,
      position: plant.position,
      sown_at: new Date(2025, 3, 1 + plant.sownDay).toISOString(),
      sown_day: plant.sownDay,
      state: plant.state,
      current_radius_mm: plant.radiusMm,
    };
    return doc as unknown as Record<string, unknown>;
  }

  private fieldResponse(parsed: URL): Response {
    const style = parsed.searchParams.get("style") ?? "abstract";
    if (style !== "abstract" && style !== "photo_grid") {
      return fail(400, "GardenError", `unknown style ${style}`);
    }
    const day = this.completedDays;
    const refs =
      style === "photo_grid"
        ? this.plots.map((p) => `/api/timelapse/${day}/topdown?plot_id=${p.plot_id}`)
        : [`/api/timelapse/${day}/topdown`];
    return json(200, {
      sim_time: new Date(2025, 3, 1 + day).toISOString(),
      day: day + 1,
      completed_days: day,
      plot_id: null,
      plants: [...this.plants.values()].map((p) => this.plantDoc(p)),
      weeds: [...this.weeds.values()].map((w) => ({
        id: w.id,
        plot_id: w.plotId,
        position: w.position,
      })),
      germination_rate: 0,
      gantry: { position: [0, 0, 0], mounted_tool: null },
      moisture_mean: 0.4,
      plots: this.plots,
      snapshot: { style, day: this.plants.size > 0 ? day : null, refs },
      moisture: { cell_mm: 100, grid: [], mean: 0.4 },
    });
  }

  // -- task validation (mirror of the service's mode policy) ----------------

  private async submit(
    me: FakeUser,
    body: Record<string, unknown>,
  ): Promise<Response> {
    const kind = String(body["kind"] ?? "");
    if (!["sow", "water", "weed", "scan", "moisture_read"].includes(kind)) {
      return fail(400, "GardenError", `malformed task body: unknown kind ${kind}`);
    }

    if (kind === "water" && body["all_in_plot"] && this.waterAllHold) {
      await this.waterAllHold; // test gate: response held open, in flight
    }

    const plot = this.plots.find((p) => p.plot_id === me.plot_id);
    if (!plot) return fail(404, "UnknownPlot", me.plot_id);

    // hard rule first: targets stay inside your own plot
    const target = body["target"] as [number, number] | undefined;
    if (target && kind !== "scan") {
      const inPlot =
        target[0] >= plot.origin[0] &&
        target[0] < plot.origin[0] + plot.size_mm &&
        target[1] >= plot.origin[1] &&
        target[1] < plot.origin[1] + plot.size_mm;
      if (!inPlot) {
        return fail(403, "CrossPlotTarget", `target is outside your plot ${me.plot_id}`, {
          target,
        });
      }
    }
    if (kind === "water" && body["all_in_plot"] && body["all_in_plot"] !== me.plot_id) {
      return fail(403, "CrossPlotTarget", "not your plot", {
        plot_id: body["all_in_plot"],
      });
    }

    const findings: Finding[] = [];
    if (me.mode === "automated") {
      if (kind === "sow" && target) {
        findings.push({
          rule_id: "A1",
          reason: "automated mode places seeds itself; submit without a position",
          entities: {},
        });
      }
      if (kind === "water" || kind === "weed") {
        findings.push({
          rule_id: "A2",
          reason: "automated mode already schedules this care; request is redundant",
          entities: { kind },
        });
      }
      if (findings.length > 0) {
        return fail(409, "TaskRejected", "task rejected by mode policy", { findings });
      }
    }

    let resolved = target;
    if (kind === "sow") {
      const species = String(body["species"] ?? "");
      const radius = SPECIES_RADII[species];
      if (!radius) return fail(404, "UnknownSpecies", `unknown species ${species}`);
      if (!resolved) {
        resolved = this.autoPlace(plot, radius);
        if (!resolved) {
          return fail(409, "PlacementExhausted", "no free grid cell", {
            available: 0,
          });
        }
      }
      for (const plant of this.plants.values()) {
        const other = SPECIES_RADII[plant.speciesId] ?? plant.radiusMm;
        const dist = Math.hypot(
          plant.position[0] - resolved[0],
          plant.position[1] - resolved[1],
        );
        if (dist < radius + other) {
          findings.push({
            rule_id: "R1",
            reason: `too close to ${plant.id}`,
            entities: { neighbor_id: plant.id, distance_mm: Math.round(dist) },
          });
        }
      }
      if (
        resolved[0] - radius < 0 ||
        resolved[0] + radius > FIELD_W ||
        resolved[1] - radius < 0 ||
        resolved[1] + radius > FIELD_H
      ) {
        findings.push({
          rule_id: "R3",
          reason: "too close to the field boundary",
          entities: {},
        });
      }
    }
    if (kind === "water") {
      const ids = body["all_in_plot"]
        ? [...this.plants.values()]
            .filter((p) => p.plotId === me.plot_id)
            .map((p) => p.id)
        : ((body["plant_ids"] as string[]) ?? []);
      for (const pid of ids) {
        if (this.plants.get(pid)?.recentlyWatered) {
          findings.push({
            rule_id: "R2",
            reason: `${pid} was watered recently`,
            entities: { plant_id: pid },
          });
        }
      }
    }

    let verdict: "ok" | "warnings" | "rejected" = "ok";
    if (findings.length > 0) {
      verdict = me.mode === "hybrid" ? "rejected" : "warnings";
    }
    if (verdict === "rejected") {
      return fail(409, "TaskRejected", "task rejected by mode policy", { findings });
    }

    const taskId = `task-${String(this.nextTask++).padStart(4, "0")}`;
    const task: FakeTask = {
      taskId,
      userId: me.user_id,
      kind,
      body: { ...body, target: resolved },
      state: "pending",
      estimateS: 30,
    };
    this.tasks.set(taskId, task);
    this.order.push(taskId);
    const position = this.order.length;
    this.emit("queue.submitted", {
      task_id: taskId,
      user_id: me.user_id,
      kind,
      position,
      estimate_s: task.estimateS,
      origin: "user",
    });
    const receipt: Record<string, unknown> = {
      task_id: taskId,
      position,
      estimate_s: task.estimateS,
      verdict,
      findings,
    };
    if (kind === "sow" && resolved) receipt["resolved_target"] = resolved;
    return json(200, receipt);
  }

  private autoPlace(plot: PlotDoc, radius: number): [number, number] | undefined {
    const pitch = 2 * radius;
    for (let y = plot.origin[1] + radius; y <= plot.origin[1] + plot.size_mm - radius; y += pitch) {
      for (let x = plot.origin[0] + radius; x <= plot.origin[0] + plot.size_mm - radius; x += pitch) {
        let free = true;
        for (const plant of this.plants.values()) {
          const other = SPECIES_RADII[plant.speciesId] ?? plant.radiusMm;
          if (Math.hypot(plant.position[0] - x, plant.position[1] - y) < radius + other) {
            free = false;
            break;
          }
        }
        if (free) return [x, y];
      }
    }
    return undefined;
  }

  private queueRows(): QueueRow[] {
    const rows: QueueRow[] = [];
    let cumulative = 0;
    let position = 1;
    for (const taskId of this.order) {
      const task = this.tasks.get(taskId);
      if (!task || task.state !== "pending") continue;
      cumulative += task.estimateS;
      rows.push({
        task_id: taskId,
        user_id: task.userId,
        kind: task.kind,
        state: "pending",
        position: position++,
        estimate_s: task.estimateS,
        cumulative_wait_s: cumulative,
      });
    }
    return rows;
  }

  // -- SSE -----------------------------------------------------------------

  private streamResponse(parsed: URL, init?: RequestInit): Response {
    const once = parsed.searchParams.get("once") === "true";
    let cursor = Number(parsed.searchParams.get("cursor") ?? 0);
    const headers = (init?.headers ?? {}) as Record<string, string>;
    const lastId = headers["last-event-id"];
    if (!parsed.searchParams.has("cursor") && lastId && /^\d+$/.test(lastId)) {
      cursor = Number(lastId);
    }
    const backlog = this.buffer.filter((env) => env.seq > cursor);
    const listeners = this.listeners;
    const signal = init?.signal ?? undefined;

    const stream = new ReadableStream<Uint8Array>({
      start: (controller) => {
        controller.enqueue(encoder.encode("retry: 20\n\n"));
        for (const env of backlog) controller.enqueue(sseFrame(env));
        if (once) {
          controller.close();
          return;
        }
        const push = (env: StreamEnvelope) => {
          try {
            controller.enqueue(sseFrame(env));
          } catch {
            listeners.delete(push);
          }
        };
        listeners.add(push);
        signal?.addEventListener("abort", () => {
          listeners.delete(push);
          try {
            controller.close();
          } catch {
            // already closed
          }
        });
      },
      cancel: () => undefined,
    });
    return new Response(stream, {
      status: 200,
      headers: { "content-type": "text/event-stream" },
    });
  }
}
