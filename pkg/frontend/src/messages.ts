/** Wire message shapes shared with the stream service (NDJSON, one per line). */

export interface TelemetryMessage {
  schema_version: string;
  kind: string;
  time_s: number;
  source: string;
  seq?: number;
  x_m?: number;
  pressure_pa?: number;
  valve_state?: string;
  payload?: Record<string, unknown>;
}

/** A line that failed to parse; folded so the view can surface it. */
export interface InvalidLine {
  kind: "invalid";
  raw: string;
}

/** Local error replies (rejected commands, transport faults). */
export interface ErrorEntry {
  kind: "error";
  error: string;
}

export type ConsoleInput = TelemetryMessage | InvalidLine | ErrorEntry;

export function parseLine(line: string): ConsoleInput {
  let obj: unknown;
  try {
    obj = JSON.parse(line);
  } catch {
    return { kind: "invalid", raw: line };
  }
  if (typeof obj !== "object" || obj === null) {
    return { kind: "invalid", raw: line };
  }
  const msg = obj as Record<string, unknown>;
  if (msg.kind === "error" && typeof msg.error === "string") {
    return { kind: "error", error: msg.error };
  }
  if (
    typeof msg.kind !== "string" ||
    typeof msg.time_s !== "number" ||
    typeof msg.source !== "string"
  ) {
    return { kind: "invalid", raw: line };
  }
  return msg as unknown as TelemetryMessage;
}
