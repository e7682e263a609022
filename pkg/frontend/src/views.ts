// Local view state and pure presentation rules. The layout is two rows:
// exactly one scope active on top (global map or own plot) and exactly one
// panel active at the bottom. Which action buttons exist is a function of
// the session's care mode alone.

import type { ApiError } from "./api.js";
import type { Finding, Mode } from "./types.js";

export type Scope = "global" | "plot";
export type RenderStyle = "abstract" | "photo_grid";
export type Panel = "actions" | "stream" | "timeline" | "chat" | "weather";

export class ViewState {
  scope: Scope = "global";
  style: RenderStyle = "abstract";
  panel: Panel = "actions";

  setScope(scope: Scope): void {
    this.scope = scope;
  }

  setPanel(panel: Panel): void {
    this.panel = panel;
  }

  toggleStyle(): RenderStyle {
    this.style = this.style === "abstract" ? "photo_grid" : "abstract";
    return this.style;
  }
}

export interface ActionAvailability {
  sowAuto: boolean;
  sowAtTarget: boolean;
  water: boolean;
  weed: boolean;
  waterAll: boolean;
  moistureRead: boolean;
  scan: boolean;
}

// Automated mode hides interactive care: the planner owns watering and
// weeding, and explicit sow positions are rejected (auto-placed sows and
// read-only tasks stay available). Manual and hybrid expose everything;
// they differ in whether rule findings warn or reject, not in what shows.
export function availableActions(mode: Mode): ActionAvailability {
  const automated = mode === "automated";
  return {
    sowAuto: true,
    sowAtTarget: !automated,
    water: !automated,
    weed: !automated,
    waterAll: !automated,
    moistureRead: true,
    scan: true,
  };
}

export interface FindingView {
  ruleId: string;
  message: string;
  highlightPlantIds: string[];
}

const RULE_TEXT: Record<string, string> = {
  R1: "too close to a neighboring plant",
  R2: "recently watered; this would overwater",
  R3: "too close to the field edge",
  A1: "automated mode places seeds itself; submit without a position",
  A2: "automated mode already schedules this care",
};

export function describeFinding(finding: Finding): FindingView {
  const base = RULE_TEXT[finding.rule_id] ?? finding.reason;
  const highlight: string[] = [];
  const neighbor = finding.entities["neighbor_id"] ?? finding.entities["plant_id"];
  if (typeof neighbor === "string") highlight.push(neighbor);
  for (const value of Object.values(finding.entities)) {
    if (Array.isArray(value)) {
      for (const v of value) {
        if (typeof v === "string" && v.startsWith("plant-")) highlight.push(v);
      }
    }
  }
  return {
    ruleId: finding.rule_id,
    message: `${finding.rule_id}: ${base}`,
    highlightPlantIds: [...new Set(highlight)],
  };
}

const ERROR_TEXT: Record<string, string> = {
  CrossPlotTarget: "That spot is outside your plot.",
  PlacementExhausted: "Your plot has no free space for that species.",
  DuplicateWithinDebounce: "Already requested moments ago; the robot is on it.",
  QueueFull: "The robot's queue is full right now; try again shortly.",
  InvalidCredentials: "Wrong user id or password.",
  Unauthenticated: "Session expired; log in again.",
  MessageTooLong: "That message is too long.",
  NotCancellable: "That task already started and cannot be cancelled.",
};

export function errorMessage(err: ApiError): string {
  return ERROR_TEXT[err.kind] ?? err.message;
}
