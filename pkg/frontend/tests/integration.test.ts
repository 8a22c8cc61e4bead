// End-to-end check against the real Python stack: spawns `voicebridge run`
// with the replay backend, connects over a real WebSocket, and drives the
// actual ConsoleViewModel with live frames.
//
// Set VOICEBRIDGE_SKIP_INTEGRATION=1 to skip (e.g. no Python available).

import { spawn, type ChildProcess } from "node:child_process";
import { mkdtempSync, writeFileSync } from "node:fs";
import { tmpdir } from "node:os";
import { dirname, join, resolve } from "node:path";
import { fileURLToPath } from "node:url";
import { afterAll, beforeAll, describe, expect, it } from "vitest";
import WebSocket from "ws";

import type { SocketLike } from "../src/client.js";
import { BusClient } from "../src/client.js";
import { ConsoleViewModel } from "../src/viewmodel.js";

const SKIP = process.env.VOICEBRIDGE_SKIP_INTEGRATION === "1";
const HERE = dirname(fileURLToPath(import.meta.url));
const REPO_ROOT = resolve(HERE, "..", "..");
const TCP_PORT = 27420;
const WS_PORT = 27421;
const DASH_PORT = 27422;

let proc: ChildProcess | null = null;
let vm: ConsoleViewModel;
let client: BusClient;
let configPath = "";

function sleep(ms: number): Promise<void> {
  return new Promise((r) => setTimeout(r, ms));
}

async function waitFor(
  predicate: () => boolean,
  timeoutMs: number,
  label: string,
): Promise<void> {
  const deadline = Date.now() + timeoutMs;
  while (Date.now() < deadline) {
    if (predicate()) return;
    await sleep(10);
  }
  throw new Error(`timed out waiting for ${label}`);
}

describe.skipIf(SKIP)("dashboard against the live stack", () => {
  beforeAll(async () => {
    const dir = mkdtempSync(join(tmpdir(), "vb-dash-"));
    // A far-future final line keeps the replay gateway (and stack) alive.
    const replay = join(dir, "replay.txt");
    writeFileSync(replay, "0\they robot\n600000\tterminate\n");
    configPath = join(dir, "config.toml");
    writeFileSync(
      configPath,
      [
        "[backend]",
        'kind = "replay"',
        `replay_file = '${replay}'`,
        "[robot]",
        `chain_file = '${REPO_ROOT}/configs/chain.toml'`,
        `scenario_file = '${REPO_ROOT}/configs/scenario.toml'`,
        "[bus]",
        `tcp_port = ${TCP_PORT}`,
        `ws_port = ${WS_PORT}`,
        `dashboard_port = ${DASH_PORT}`,
        `dashboard_root = '${REPO_ROOT}/frontend/dist'`,
      ].join("\n"),
    );
    proc = spawn(
      "python3",
      ["-m", "voicebridge.cli", "--config", configPath, "run"],
      { cwd: REPO_ROOT, stdio: ["ignore", "pipe", "pipe"] },
    );

    vm = new ConsoleViewModel();
    client = new BusClient(
      `ws://127.0.0.1:${WS_PORT}`,
      vm,
      (url) => new WebSocket(url) as unknown as SocketLike,
    );

    // The stack needs a moment to import and bind; the client's own
    // backoff keeps retrying until the bus is up.
    client.connect();
    await waitFor(() => vm.connection === "connected", 30_000, "bus connection");
  }, 60_000);

  afterAll(() => {
    client?.dispose();
    proc?.kill();
  });

  it("receives state updates at 10 Hz or better", async () => {
    const before = vm.stateUpdatesSeen;
    await sleep(1000);
    const received = vm.stateUpdatesSeen - before;
    expect(received).toBeGreaterThanOrEqual(10);
  });

  it("logs an injected hey robot / tense sequence with WER values", async () => {
    expect(client.sendInjection("hey robot")).toBe(true);
    await waitFor(
      () => vm.log.some((e) => e.summary.includes("hey robot")),
      5000,
      "hey robot match entry",
    );
    expect(client.sendInjection("tense")).toBe(true);
    await waitFor(
      () => vm.log.some((e) => e.summary.includes('"tense"')),
      5000,
      "tense match entry",
    );
    const matches = vm.log.filter((e) => e.kind === "match");
    expect(matches.every((e) => typeof e.wer === "number")).toBe(true);
    await waitFor(
      () => vm.sessionBadge === "active",
      5000,
      "active badge after arming",
    );
  });

  it("e-stop produces a halted badge within 200 ms", async () => {
    // Make sure motion is (or was just) in flight, then stop.
    client.sendInjection("pull more");
    await sleep(50);
    const t0 = Date.now();
    expect(client.emergencyStop()).toBe(true);
    await waitFor(() => vm.sessionBadge === "halted", 1000, "halted badge");
    const elapsed = Date.now() - t0;
    expect(elapsed).toBeLessThanOrEqual(200);
    expect(vm.motionLocked).toBe(true);

    // Re-arm: the lock clears once a state update shows Active again.
    client.sendInjection("hey robot");
    await waitFor(() => vm.canSendMotion, 5000, "motion unlock after re-arm");
  });

  it("serves the dashboard page and scenario context", async () => {
    const page = await fetch(`http://127.0.0.1:${DASH_PORT}/`);
    expect(page.status).toBe(200);
    expect(await page.text()).toContain("voicebridge console");
    const scenario = await fetch(`http://127.0.0.1:${DASH_PORT}/scenario.json`);
    expect(scenario.status).toBe(200);
    const body = (await scenario.json()) as { trocar_point: number[] };
    expect(body.trocar_point).toHaveLength(3);
  });

  it("reconnects after a stack restart without duplicated log ids", async () => {
    proc?.kill();
    await waitFor(() => vm.connection !== "connected", 10_000, "disconnect");

    proc = spawn(
      "python3",
      ["-m", "voicebridge.cli", "--config", configPath, "run"],
      { cwd: REPO_ROOT, stdio: ["ignore", "pipe", "pipe"] },
    );
    // The client's own backoff drives the reconnect.
    await waitFor(() => vm.connection === "connected", 30_000, "reconnect");

    const responsesBefore = vm.log.filter((e) => e.kind === "response").length;
    client.sendInjection("hey robot");
    client.sendInjection("tense");
    await waitFor(
      () => vm.log.filter((e) => e.kind === "response").length > responsesBefore,
      10_000,
      "new response entry after restart",
    );
    const ids = vm.log
      .filter((e) => e.responseId !== null)
      .map((e) => e.responseId);
    expect(new Set(ids).size).toBe(ids.length);
  });
});
