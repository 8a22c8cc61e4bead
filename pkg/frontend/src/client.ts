// WebSocket bus client with automatic reconnect. The socket factory and
// timer are injectable so the reconnect logic is testable without a server.

import { encodeInjection, parseFrame } from "./protocol.js";
import { ConsoleViewModel, reconnectDelayMs } from "./viewmodel.js";

export interface SocketLike {
  onopen: (() => void) | null;
  onclose: (() => void) | null;
  onerror: (() => void) | null;
  onmessage: ((event: { data: unknown }) => void) | null;
  send(data: string): void;
  close(): void;
}

export type SocketFactory = (url: string) => SocketLike;
export type Scheduler = (fn: () => void, delayMs: number) => void;

export class BusClient {
  readonly scheduledDelays: number[] = [];

  private socket: SocketLike | null = null;
  private attempts = 0;
  private disposed = false;

  constructor(
    private readonly url: string,
    private readonly vm: ConsoleViewModel,
    private readonly factory: SocketFactory = (u) =>
      new WebSocket(u) as unknown as SocketLike,
    private readonly schedule: Scheduler = (fn, ms) => {
      setTimeout(fn, ms);
    },
  ) {}

  connect(): void {
    if (this.disposed) return;
    this.vm.setConnection("connecting");
    let socket: SocketLike;
    try {
      socket = this.factory(this.url);
    } catch {
      this.vm.setConnection("disconnected");
      this.scheduleReconnect();
      return;
    }
    this.socket = socket;
    socket.onopen = () => {
      this.attempts = 0;
      this.vm.setConnection("connected");
    };
    socket.onmessage = (event) => {
      if (typeof event.data !== "string") return;
      const frame = parseFrame(event.data);
      if (frame !== null) this.vm.applyFrame(frame);
    };
    socket.onerror = () => {
      // onclose follows; nothing else to do.
    };
    socket.onclose = () => {
      this.socket = null;
      this.vm.setConnection("disconnected");
      this.scheduleReconnect();
    };
  }

  private scheduleReconnect(): void {
    if (this.disposed) return;
    const delay = reconnectDelayMs(this.attempts);
    this.attempts += 1;
    this.scheduledDelays.push(delay);
    this.schedule(() => this.connect(), delay);
  }

  /** Inject typed text as if it were a spoken utterance. */
  sendInjection(text: string): boolean {
    const trimmed = text.trim();
    if (trimmed === "" || this.socket === null || !this.vm.canSendAnything) {
      return false;
    }
    this.socket.send(encodeInjection(trimmed));
    return true;
  }

  /** Dedicated emergency stop: always allowed while connected. */
  emergencyStop(): boolean {
    if (this.socket === null || !this.vm.canSendAnything) return false;
    this.socket.send(encodeInjection("stop"));
    this.vm.engageEstop();
    return true;
  }

  dispose(): void {
    this.disposed = true;
    this.socket?.close();
  }
}
