// Client-side state, reconstructed from server snapshots plus stream
// deltas. The render layer is a pure projection of this store and local
// view state; nothing here mutates server state.

import type {
  ChatMessage,
  Mode,
  PlantDoc,
  PlotDoc,
  QueueRow,
  StreamEnvelope,
  TimelineEvent,
  UserProfile,
  WeedDoc,
} from "./types.js";

export interface QueueItem {
  taskId: string;
  userId: string;
  kind: string;
  state: "pending" | "executing" | "done" | "failed" | "cancelled";
  estimateS: number;
  origin: string;
}

export interface PlantMarker {
  id: string;
  plotId: string;
  owner: string;
  speciesId: string;
  position: [number, number];
  state: string;
  radiusMm: number;
}

export interface WeedMarker {
  id: string;
  plotId: string;
  position: [number, number];
}

interface GrowthRow {
  plant_id: string;
  event?: string;
  radius_mm?: number;
  state?: string;
  [extra: string]: unknown;
}

export class GardenStore {
  session: UserProfile | null = null;
  plots: PlotDoc[] = [];
  modes = new Map<string, Mode>();
  plants = new Map<string, PlantMarker>();
  weeds = new Map<string, WeedMarker>();
  timeline: TimelineEvent[] = [];
  chat: ChatMessage[] = [];
  completedDays = 0;
  germinationRate = 0;
  lastSeq = 0;

  private items = new Map<string, QueueItem>();
  private pendingOrder: string[] = [];
  private executingOrder: string[] = [];
  private timelineIds = new Set<number>();

  // -- snapshot seeding (initial polls, reload) --------------------------

  seedUsers(users: UserProfile[]): void {
    for (const u of users) this.modes.set(u.user_id, u.mode);
  }

  seedField(doc: {
    completed_days: number;
    plants: PlantDoc[];
    weeds: WeedDoc[];
    germination_rate: number;
    plots: PlotDoc[];
  }): void {
    this.completedDays = doc.completed_days;
    this.germinationRate = doc.germination_rate;
    this.plots = doc.plots;
    this.plants.clear();
    for (const p of doc.plants) this.plants.set(p.id, markerOf(p));
    this.weeds.clear();
    for (const w of doc.weeds) {
      this.weeds.set(w.id, { id: w.id, plotId: w.plot_id, position: w.position });
    }
  }

  seedQueue(rows: QueueRow[]): void {
    this.items.clear();
    this.pendingOrder = [];
    this.executingOrder = [];
    for (const row of rows) {
      this.items.set(row.task_id, {
        taskId: row.task_id,
        userId: row.user_id,
        kind: row.kind,
        state: row.state,
        estimateS: row.estimate_s,
        origin: "user",
      });
      if (row.state === "executing") this.executingOrder.push(row.task_id);
      else this.pendingOrder.push(row.task_id);
    }
  }

  seedTimeline(events: TimelineEvent[]): void {
    this.timeline = [...events];
    this.timelineIds = new Set(events.map((e) => e.id));
  }

  seedChat(messages: ChatMessage[]): void {
    this.chat = [...messages];
  }

  // -- stream fold --------------------------------------------------------

  apply(env: StreamEnvelope): void {
    this.lastSeq = env.seq;
    const d = env.data;
    switch (env.type) {
      case "queue.submitted": {
        const taskId = d["task_id"] as string;
        if (this.items.has(taskId)) break; // replayed backlog after a reload
        this.items.set(taskId, {
          taskId,
          userId: d["user_id"] as string,
          kind: d["kind"] as string,
          state: "pending",
          estimateS: (d["estimate_s"] as number) ?? 0,
          origin: (d["origin"] as string) ?? "user",
        });
        this.pendingOrder.push(taskId);
        break;
      }
      case "queue.executing": {
        const taskId = d["task_id"] as string;
        const item = this.items.get(taskId);
        if (item && item.state === "pending") {
          this.dropPending(taskId);
          item.state = "executing";
          this.executingOrder.push(taskId);
        }
        break;
      }
      case "queue.done":
      case "queue.failed":
      case "queue.cancelled": {
        const taskId = d["task_id"] as string;
        this.dropPending(taskId);
        this.executingOrder = this.executingOrder.filter((t) => t !== taskId);
        const item = this.items.get(taskId);
        if (item) item.state = env.type.slice("queue.".length) as QueueItem["state"];
        break;
      }
      case "plant.created": {
        const p = d as unknown as PlantDoc;
        this.plants.set(p.id, markerOf(p));
        break;
      }
      case "plant.removed": {
        this.plants.delete(d["plant_id"] as string);
        break;
      }
      case "weed.spawned": {
        const id = (d["weed_id"] ?? d["id"]) as string;
        this.weeds.set(id, {
          id,
          plotId: d["plot_id"] as string,
          position: d["position"] as [number, number],
        });
        break;
      }
      case "weed.cleared": {
        for (const wid of (d["weeds_cleared"] as string[]) ?? []) {
          this.weeds.delete(wid);
        }
        for (const pid of (d["plants_removed"] as string[]) ?? []) {
          this.plants.delete(pid);
        }
        break;
      }
      case "mode.switch": {
        const userId = d["user_id"] as string;
        const mode = d["new"] as Mode;
        this.modes.set(userId, mode);
        if (this.session && this.session.user_id === userId) {
          this.session = { ...this.session, mode };
        }
        break;
      }
      case "chat.message": {
        const msg = d as unknown as ChatMessage;
        if (!this.chat.some((m) => m.id === msg.id)) this.chat.push(msg);
        break;
      }
      case "timeline.event": {
        const event = d as unknown as TimelineEvent;
        if (!this.timelineIds.has(event.id)) {
          this.timelineIds.add(event.id);
          this.timeline.push(event);
        }
        break;
      }
      case "day.tick": {
        this.completedDays = d["day"] as number;
        this.germinationRate = (d["germination_rate"] as number) ?? this.germinationRate;
        for (const row of ((d["growth"] as GrowthRow[]) ?? [])) {
          const plant = this.plants.get(row.plant_id);
          if (!plant) continue;
          if (typeof row.radius_mm === "number") plant.radiusMm = row.radius_mm;
          if (row.event === "germinated") plant.state = "germinated";
          if (typeof row.state === "string") plant.state = row.state;
        }
        for (const row of ((d["plants"] as GrowthRow[]) ?? [])) {
          const plant = this.plants.get((row["id"] as string) ?? row.plant_id);
          if (!plant) continue;
          if (typeof row["radius_mm"] === "number") {
            plant.radiusMm = row["radius_mm"] as number;
          }
          if (typeof row["state"] === "string") plant.state = row["state"] as string;
        }
        break;
      }
      default:
        break; // unknown event types are ignored, not errors
    }
  }

  private dropPending(taskId: string): void {
    this.pendingOrder = this.pendingOrder.filter((t) => t !== taskId);
  }

  // -- selectors ---------------------------------------------------------

  // Mirrors the server queue snapshot: executing rows first with no
  // position, then pending rows with live 1-based positions. Reorders as
  // stream deltas arrive.
  queuePanel(): QueueRow[] {
    const out: QueueRow[] = [];
    for (const taskId of this.executingOrder) {
      const item = this.items.get(taskId);
      if (!item || item.state !== "executing") continue;
      out.push({
        task_id: item.taskId,
        user_id: item.userId,
        kind: item.kind,
        state: "executing",
        position: null,
        estimate_s: item.estimateS,
        cumulative_wait_s: 0,
      });
    }
    let cumulative = 0;
    let position = 1;
    for (const taskId of this.pendingOrder) {
      const item = this.items.get(taskId);
      if (!item || item.state !== "pending") continue;
      cumulative += item.estimateS;
      out.push({
        task_id: item.taskId,
        user_id: item.userId,
        kind: item.kind,
        state: "pending",
        position: position++,
        estimate_s: item.estimateS,
        cumulative_wait_s: cumulative,
      });
    }
    return out;
  }

  positionOf(taskId: string): number | null {
    for (const row of this.queuePanel()) {
      if (row.task_id === taskId) return row.position;
    }
    return null;
  }

  taskState(taskId: string): QueueItem["state"] | null {
    return this.items.get(taskId)?.state ?? null;
  }

  modeOf(userId: string): Mode | null {
    return this.modes.get(userId) ?? null;
  }

  timelineView(filter: {
    actor?: string;
    kind?: string;
    plotId?: string;
  } = {}): TimelineEvent[] {
    return this.timeline.filter((e) => {
      if (filter.actor && e.actor !== filter.actor) return false;
      if (filter.kind && e.kind !== filter.kind) return false;
      if (filter.plotId && e.payload["plot_id"] !== filter.plotId) return false;
      return true;
    });
  }

  plantCircles(plotId?: string): PlantMarker[] {
    const out: PlantMarker[] = [];
    for (const plant of this.plants.values()) {
      if (plotId && plant.plotId !== plotId) continue;
      out.push(plant);
    }
    return out.sort((a, b) => a.id.localeCompare(b.id));
  }
}

function markerOf(p: PlantDoc): PlantMarker {
  return {
    id: p.id,
    plotId: p.plot_id,
    owner: p.owner,
    speciesId: p.species_id,
    position: p.position,
    state: p.state,
    radiusMm: p.current_radius_mm,
  };
}
