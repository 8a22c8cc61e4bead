// Pure view model: every displayed value is derived from bus frames fed
// through applyFrame(). Holds no authoritative robot state.

import type { BusFrame, StateUpdateFrame } from "./protocol.js";

export type ConnectionStatus = "connecting" | "connected" | "disconnected";

export interface LogEntry {
  kind: "match" | "response";
  stampMs: number;
  summary: string;
  accepted: boolean;
  wer: number | null;
  responseId: number | null;
}

export interface ViewModelOptions {
  logLimit?: number;
  tensionDisplayMax?: number;
  rcmToleranceM?: number;
}

export const RECONNECT_BASE_MS = 500;
export const RECONNECT_MAX_MS = 10_000;

/** Exponential backoff delay for the n-th consecutive failed attempt. */
export function reconnectDelayMs(attempt: number): number {
  return Math.min(RECONNECT_BASE_MS * 2 ** Math.max(0, attempt), RECONNECT_MAX_MS);
}

export class ConsoleViewModel {
  connection: ConnectionStatus = "connecting";
  lastState: StateUpdateFrame | null = null;
  log: LogEntry[] = [];
  motionLocked = false;
  stateUpdatesSeen = 0;

  readonly logLimit: number;
  tensionDisplayMax: number;
  rcmToleranceM: number;

  private seenResponseIds = new Set<number>();
  private lastStampMs = 0;
  private stopConfirmed = false;

  constructor(options: ViewModelOptions = {}) {
    this.logLimit = options.logLimit ?? 100;
    this.tensionDisplayMax = options.tensionDisplayMax ?? 2.0;
    this.rcmToleranceM = options.rcmToleranceM ?? 1e-3;
  }

  setConnection(status: ConnectionStatus): void {
    // Each connection is a fresh id space (the server may have restarted);
    // dedup only applies within one connection's stream.
    if (status === "connected" && this.connection !== "connected") {
      this.seenResponseIds.clear();
    }
    this.connection = status;
  }

  applyFrame(frame: BusFrame): void {
    switch (frame.type) {
      case "state_update":
        this.lastState = frame;
        this.stateUpdatesSeen += 1;
        this.lastStampMs = Math.max(this.lastStampMs, frame.stamp_ms);
        // The e-stop lock clears only once the session re-arms. Updates
        // already in flight when the stop was clicked may still say
        // "active", so arm the unlock only after a non-active state
        // confirms the stop took effect.
        if (this.motionLocked) {
          if (frame.session_mode !== "active") {
            this.stopConfirmed = true;
          } else if (this.stopConfirmed) {
            this.motionLocked = false;
          }
        }
        break;
      case "match_result": {
        this.lastStampMs = Math.max(this.lastStampMs, frame.stamp_ms);
        const label = frame.accepted
          ? `"${frame.text}" -> ${frame.command} (WER ${frame.wer.toFixed(2)})`
          : `"${frame.text}" rejected: ${frame.reason} (WER ${frame.wer.toFixed(2)})`;
        this.pushEntry({
          kind: "match",
          stampMs: frame.stamp_ms,
          summary: label,
          accepted: frame.accepted,
          wer: frame.wer,
          responseId: null,
        });
        break;
      }
      case "action_response": {
        if (this.seenResponseIds.has(frame.id)) return; // reconnect dedup
        this.seenResponseIds.add(frame.id);
        const label = frame.accepted
          ? `action #${frame.id} accepted`
          : `action #${frame.id} rejected: ${frame.reason}`;
        this.pushEntry({
          kind: "response",
          stampMs: this.lastStampMs,
          summary: label,
          accepted: frame.accepted,
          wer: null,
          responseId: frame.id,
        });
        break;
      }
      default:
        break; // transcripts and requests are not logged in the console
    }
  }

  private pushEntry(entry: LogEntry): void {
    // Frames arrive nearly ordered; insert from the back to keep the log
    // sorted by stamp without re-sorting everything.
    let index = this.log.length;
    while (index > 0 && this.log[index - 1].stampMs > entry.stampMs) {
      index -= 1;
    }
    this.log.splice(index, 0, entry);
    if (this.log.length > this.logLimit) {
      this.log.splice(0, this.log.length - this.logLimit);
    }
  }

  engageEstop(): void {
    this.motionLocked = true;
    this.stopConfirmed = false;
  }

  get sessionBadge(): string {
    if (this.connection !== "connected" || this.lastState === null) {
      return "offline";
    }
    return this.lastState.session_mode;
  }

  get tensionGauge(): number {
    const tension = this.lastState?.tension ?? 0;
    return Math.min(Math.max(tension, 0), this.tensionDisplayMax);
  }

  get rcmIndicator(): "green" | "red" | "idle" {
    if (this.lastState === null) return "idle";
    return this.lastState.rcm_error <= this.rcmToleranceM ? "green" : "red";
  }

  get canSendMotion(): boolean {
    return this.connection === "connected" && !this.motionLocked;
  }

  get canSendAnything(): boolean {
    return this.connection === "connected";
  }
}
