// Payload shapes of the gardenbot HTTP API and event stream. These mirror
// the JSON the service emits; the UI never invents fields of its own.

export type Mode = "manual" | "hybrid" | "automated";

export interface UserProfile {
  user_id: string;
  display_name: string;
  plot_id: string;
  mode: Mode;
}

export interface LoginSession extends UserProfile {
  token: string;
}

// Soft-rule finding attached to a validation verdict. rule_id is stable
// (R1 spacing, R2 overwatering, R3 field margin, A1/A2 automated-mode).
export interface Finding {
  rule_id: string;
  reason: string;
  entities: Record<string, unknown>;
}

export type Verdict = "ok" | "warnings" | "rejected";

export interface SubmitReceipt {
  task_id: string;
  position: number;
  estimate_s: number;
  verdict: Verdict;
  findings: Finding[];
  resolved_target?: [number, number];
}

export interface QueueRow {
  task_id: string;
  user_id: string;
  kind: string;
  state: "executing" | "pending";
  position: number | null;
  estimate_s: number;
  cumulative_wait_s: number;
}

export interface TimelineEvent {
  id: number;
  timestamp: string;
  actor: string;
  kind: string;
  payload: Record<string, unknown>;
}

export interface PlantDoc {
  id: string;
  plot_id: string;
  owner: string;
  species_id: string;
  position: [number, number];
  sown_at: string;
  sown_day: number;
  state: string;
  current_radius_mm: number;
  [extra: string]: unknown;
}

export interface WeedDoc {
  id: string;
  plot_id: string;
  position: [number, number];
}

export interface PlotDoc {
  plot_id: string;
  origin: [number, number];
  size_mm: number;
  owner: string | null;
}

export interface SnapshotRefs {
  style: string;
  day: number | null;
  refs: string[];
}

export interface FieldResponse {
  sim_time: string;
  day: number;
  completed_days: number;
  plot_id: string | null;
  plants: PlantDoc[];
  weeds: WeedDoc[];
  germination_rate: number;
  gantry: Record<string, unknown>;
  moisture_mean: number;
  plots: PlotDoc[];
  snapshot: SnapshotRefs;
  moisture: { cell_mm: number; grid: number[][]; mean: number };
}

export interface ChatMessage {
  id: number;
  user_id: string;
  message: string;
  timestamp: string;
}

export interface ModeSwitchResult {
  user_id: string;
  old: Mode;
  new: Mode;
  timestamp: string;
}

export interface TimelapseIndex {
  perspectives: string[];
  days: { day: number; captured_at: string }[];
}

export interface WeatherView {
  [key: string]: unknown;
}

// One frame on the wire: the SSE `data:` field carries this envelope and
// the SSE `id:` field repeats `seq` for resume cursors.
export interface StreamEnvelope {
  seq: number;
  t: string;
  type: string;
  data: Record<string, unknown>;
}

export interface ErrorPayload {
  code: number;
  error: string;
  message: string;
  details: Record<string, unknown>;
}

// Bodies accepted by POST /api/tasks.
export type TaskBody =
  | { kind: "sow"; species: string; target?: [number, number] }
  | { kind: "water"; plant_ids?: string[]; all_in_plot?: string }
  | { kind: "weed"; target: [number, number] }
  | { kind: "scan"; plot_id?: string }
  | { kind: "moisture_read"; target: [number, number] };

export interface TimelineFilter {
  actor?: string;
  plot_id?: string;
  kind?: string;
  since?: string;
  until?: string;
  after_id?: number;
  limit?: number;
}
