// Bus wire format: one JSON object per WebSocket text frame, discriminated
// by "type". Mirrors the server's six message kinds.

export interface StateUpdateFrame {
  type: "state_update";
  stamp_ms: number;
  session_mode: "standby" | "active" | "halted";
  joint_positions: number[];
  tool_tip_position: [number, number, number];
  rcm_error: number;
  gripper_aperture: number;
  pull_displacement: number;
  tension: number;
}

export interface MatchResultFrame {
  type: "match_result";
  stamp_ms: number;
  text: string;
  command: string | null;
  wer: number;
  threshold: number;
  accepted: boolean;
  reason: string;
}

export interface ActionRequestFrame {
  type: "action_request";
  id: number;
  command: string;
  stamp_ms: number;
}

export interface ActionResponseFrame {
  type: "action_response";
  id: number;
  accepted: boolean;
  reason: string;
}

export interface TranscriptFrame {
  type: "transcript";
  text: string;
  t_utterance_end: number;
  t_transcript_ready: number;
  backend_id: string;
}

export interface InjectCommandFrame {
  type: "inject_command";
  text: string;
}

export type BusFrame =
  | StateUpdateFrame
  | MatchResultFrame
  | ActionRequestFrame
  | ActionResponseFrame
  | TranscriptFrame
  | InjectCommandFrame;

const KNOWN_TYPES = new Set([
  "state_update",
  "match_result",
  "action_request",
  "action_response",
  "transcript",
  "inject_command",
]);

/** Parse one frame; unknown types and malformed JSON yield null. */
export function parseFrame(raw: string): BusFrame | null {
  let payload: unknown;
  try {
    payload = JSON.parse(raw);
  } catch {
    return null;
  }
  if (typeof payload !== "object" || payload === null) return null;
  const type = (payload as { type?: unknown }).type;
  if (typeof type !== "string" || !KNOWN_TYPES.has(type)) return null;
  return payload as BusFrame;
}

export function encodeInjection(text: string): string {
  return JSON.stringify({ type: "inject_command", text });
}

/** Static task context served next to the dashboard (not live state). */
export interface ScenarioInfo {
  trocar_point: [number, number, number];
  rcm_tolerance_m: number;
  grasp_position: [number, number, number];
  tension_display_max: number;
}
