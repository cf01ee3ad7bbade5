/**
 * Console view state as a pure fold over the received message sequence.
 *
 * No local physics: everything rendered derives from messages. Replaying a
 * captured stream through foldMessage reproduces the identical state, which
 * is what the replay tests assert. The open-valve controls are enabled iff
 * the latest verdict naming that valve is ALLOW; the service re-validates
 * server-side regardless.
 */

import type { ConsoleInput, TelemetryMessage } from "./messages.js";

export interface Alarm {
  time_s: number;
  text: string;
  severity: "info" | "warning" | "alert";
}

export interface LocalizationPanel {
  Z_pa: number | null;
  Z1: number | null;
  l1_raw_m: number | null;
  l1_m: number | null;
  l3_m: number | null;
}

export interface ConsoleViewState {
  simTime: number;
  /** latest live profile per line: x_m -> pressure_pa */
  profiles: Record<string, Record<number, number>>;
  /** closure instant learned from the first closed valve report */
  t1: number | null;
  /** profile snapshots per line at t1 + k*120 s, keyed "a0".."a600" */
  curves: Record<string, Record<string, Record<number, number>>>;
  /** valve board: id -> reported state */
  valves: Record<string, string>;
  alarms: Alarm[];
  localization: LocalizationPanel;
  /** open-control gating: valve id -> enabled */
  gates: Record<string, boolean>;
  lastVerdict: string | null;
  phase: string | null;
  invalidLines: number;
}

export const CURVE_OFFSETS = [0, 120, 240, 360, 480, 600];

export function initialState(): ConsoleViewState {
  return {
    simTime: 0,
    profiles: {},
    t1: null,
    curves: {},
    valves: {},
    alarms: [],
    localization: { Z_pa: null, Z1: null, l1_raw_m: null, l1_m: null, l3_m: null },
    gates: {},
    lastVerdict: null,
    phase: null,
    invalidLines: 0,
  };
}

function cloned(state: ConsoleViewState): ConsoleViewState {
  return JSON.parse(JSON.stringify(state)) as ConsoleViewState;
}

function pushAlarm(s: ConsoleViewState, time_s: number, text: string, severity: Alarm["severity"]): void {
  s.alarms.push({ time_s, text, severity });
}

function foldPressure(s: ConsoleViewState, m: TelemetryMessage): void {
  const payload = (m.payload ?? {}) as { line_id?: string };
  const line = payload.line_id ?? "unknown";
  if (typeof m.x_m !== "number" || typeof m.pressure_pa !== "number") return;
  if (!s.profiles[line]) s.profiles[line] = {};
  s.profiles[line][m.x_m] = m.pressure_pa;
  if (s.t1 !== null) {
    const offset = m.time_s - s.t1;
    if (offset >= 0 && CURVE_OFFSETS.includes(offset)) {
      const key = `a${offset}`;
      if (!s.curves[line]) s.curves[line] = {};
      if (!s.curves[line][key]) s.curves[line][key] = {};
      s.curves[line][key][m.x_m] = m.pressure_pa;
    }
  }
}

function foldValve(s: ConsoleViewState, m: TelemetryMessage): void {
  const payload = (m.payload ?? {}) as { valve_id?: string; cause?: string };
  const id = payload.valve_id;
  if (!id || typeof m.valve_state !== "string") return;
  s.valves[id] = m.valve_state;
  const severity = m.valve_state === "closed" ? "alert" : "info";
  pushAlarm(s, m.time_s, `valve ${id} -> ${m.valve_state} (${payload.cause ?? "reported"})`, severity);
  if (m.valve_state === "closed" && s.t1 === null && id.startsWith("sv-")) {
    s.t1 = m.time_s;
    pushAlarm(s, m.time_s, `closure signature: isolation at t1 = ${m.time_s}s`, "alert");
    // samples at t1 itself were folded before this report arrived; the live
    // profile at this instant is the a0 curve
    for (const [line, profile] of Object.entries(s.profiles)) {
      if (!s.curves[line]) s.curves[line] = {};
      s.curves[line]["a0"] = { ...profile };
    }
  }
}

function foldVerdict(s: ConsoleViewState, m: TelemetryMessage): void {
  const p = (m.payload ?? {}) as {
    verdict?: string;
    valve_ids?: Array<string | null>;
    Z_pa?: number;
    Z1?: number;
    l1_raw_m?: number;
    l1_snapped_m?: number;
    l3_snapped_m?: number;
    inlet_ratio?: number;
  };
  if (typeof p.verdict !== "string") return;
  s.lastVerdict = p.verdict;
  if (typeof p.Z_pa === "number") s.localization.Z_pa = p.Z_pa;
  if (typeof p.Z1 === "number") s.localization.Z1 = p.Z1;
  if (typeof p.l1_raw_m === "number") s.localization.l1_raw_m = p.l1_raw_m;
  if (typeof p.l1_snapped_m === "number") s.localization.l1_m = p.l1_snapped_m;
  if (typeof p.l3_snapped_m === "number") s.localization.l3_m = p.l3_snapped_m;
  const enabled = p.verdict === "ALLOW";
  for (const vid of p.valve_ids ?? []) {
    if (typeof vid === "string") s.gates[vid] = enabled;
  }
  const ratio = typeof p.inlet_ratio === "number" ? ` (ratio ${p.inlet_ratio.toFixed(4)})` : "";
  pushAlarm(s, m.time_s, `verdict ${p.verdict}${ratio}`, enabled ? "info" : "warning");
}

function foldJournal(s: ConsoleViewState, m: TelemetryMessage): void {
  const p = (m.payload ?? {}) as {
    phase_before?: string;
    phase_after?: string;
    note?: string | null;
  };
  if (p.phase_after && p.phase_after !== p.phase_before) {
    s.phase = p.phase_after;
    pushAlarm(s, m.time_s, `phase ${p.phase_before} -> ${p.phase_after}`, "info");
  } else if (p.note) {
    pushAlarm(s, m.time_s, p.note, "warning");
  }
}

/** Pure fold: returns a new state; the input state is never mutated. */
export function foldMessage(state: ConsoleViewState, input: ConsoleInput): ConsoleViewState {
  const s = cloned(state);
  if (input.kind === "invalid" && "raw" in input) {
    s.invalidLines += 1;
    pushAlarm(s, s.simTime, "unparseable stream line dropped", "warning");
    return s;
  }
  if (input.kind === "error" && "error" in input) {
    pushAlarm(s, s.simTime, `service rejection: ${input.error}`, "warning");
    return s;
  }
  const m = input as TelemetryMessage;
  s.simTime = Math.max(s.simTime, m.time_s);
  switch (m.kind) {
    case "pressure_sample":
      foldPressure(s, m);
      break;
    case "valve_position":
      foldValve(s, m);
      break;
    case "verdict":
      foldVerdict(s, m);
      break;
    case "journal":
      foldJournal(s, m);
      break;
    default:
      break; // commands echoed on the bus carry no view change
  }
  return s;
}

export function foldAll(state: ConsoleViewState, inputs: ConsoleInput[]): ConsoleViewState {
  return inputs.reduce(foldMessage, state);
}

/** Gating selector used by the command controls. */
export function canOpen(state: ConsoleViewState, valveId: string): boolean {
  return state.gates[valveId] === true;
}

/**
 * Guarded command dispatch: emits one command line through `send` only when
 * the gate for that valve is open. Never updates the view; the authoritative
 * state change arrives as an echoed valve event.
 */
export function sendOperatorCommand(
  state: ConsoleViewState,
  valveId: string,
  action: "open" | "close",
  operatorId: string,
  send: (line: string) => void,
): boolean {
  if (action === "open" && !canOpen(state, valveId)) {
    return false;
  }
  send(
    JSON.stringify({
      kind: "command",
      payload: { action, valve_id: valveId, operator_id: operatorId },
    }),
  );
  return true;
}
