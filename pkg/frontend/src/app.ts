// DOM wiring: renders the view model at animation-frame rate and draws the
// 2D side view (x-z plane) of the tool shaft against the trocar point.

import { BusClient } from "./client.js";
import type { ScenarioInfo, StateUpdateFrame } from "./protocol.js";
import { ConsoleViewModel } from "./viewmodel.js";

const WS_PORT = 7421;

function el<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (!node) throw new Error(`missing element #${id}`);
  return node as T;
}

async function loadScenario(): Promise<ScenarioInfo | null> {
  try {
    const resp = await fetch("scenario.json");
    if (!resp.ok) return null;
    return (await resp.json()) as ScenarioInfo;
  } catch {
    return null;
  }
}

class SideView {
  private readonly ctx: CanvasRenderingContext2D;
  private readonly trace: Array<[number, number]> = [];
  private readonly traceLimit = 300;

  constructor(
    private readonly canvas: HTMLCanvasElement,
    private readonly scenario: ScenarioInfo | null,
  ) {
    const ctx = canvas.getContext("2d");
    if (!ctx) throw new Error("canvas 2d context unavailable");
    this.ctx = ctx;
  }

  // Project world (x, z) onto the canvas, centered on the trocar.
  private project(x: number, z: number): [number, number] {
    const scale = 1600; // px per meter
    const cx = this.scenario?.trocar_point[0] ?? 0.8;
    const cz = this.scenario?.trocar_point[2] ?? 0.6;
    return [
      this.canvas.width / 2 + (x - cx) * scale,
      this.canvas.height / 2 - (z - cz) * scale,
    ];
  }

  draw(state: StateUpdateFrame | null): void {
    const { ctx, canvas } = this;
    ctx.fillStyle = "#10151c";
    ctx.fillRect(0, 0, canvas.width, canvas.height);
    if (!state) return;

    const tip = state.tool_tip_position;
    const trocar = this.scenario?.trocar_point ?? null;

    this.trace.push([tip[0], tip[2]]);
    if (this.trace.length > this.traceLimit) this.trace.shift();

    // Tip trace.
    ctx.strokeStyle = "rgba(120, 200, 255, 0.5)";
    ctx.lineWidth = 1;
    ctx.beginPath();
    this.trace.forEach(([x, z], i) => {
      const [px, py] = this.project(x, z);
      if (i === 0) ctx.moveTo(px, py);
      else ctx.lineTo(px, py);
    });
    ctx.stroke();

    if (trocar) {
      // Shaft line: with the RCM held, the shaft runs through the trocar.
      const dx = tip[0] - trocar[0];
      const dz = tip[2] - trocar[2];
      const len = Math.hypot(dx, dz) || 1;
      const ux = dx / len;
      const uz = dz / len;
      const proximal = 0.12; // meters of shaft drawn behind the trocar
      const [x0, y0] = this.project(trocar[0] - ux * proximal, trocar[2] - uz * proximal);
      const [x1, y1] = this.project(tip[0], tip[2]);
      ctx.strokeStyle = "#d8dee9";
      ctx.lineWidth = 3;
      ctx.beginPath();
      ctx.moveTo(x0, y0);
      ctx.lineTo(x1, y1);
      ctx.stroke();

      const tolerance = this.scenario?.rcm_tolerance_m ?? 1e-3;
      ctx.fillStyle = state.rcm_error <= tolerance ? "#3ddc84" : "#ff5257";
      const [tx, ty] = this.project(trocar[0], trocar[2]);
      ctx.beginPath();
      ctx.arc(tx, ty, 6, 0, 2 * Math.PI);
      ctx.fill();
    }

    // Tool tip.
    const [px, py] = this.project(tip[0], tip[2]);
    ctx.fillStyle = "#7cc7ff";
    ctx.beginPath();
    ctx.arc(px, py, 4, 0, 2 * Math.PI);
    ctx.fill();
  }
}

function fmt(value: number, digits = 3): string {
  return value.toFixed(digits);
}

async function start(): Promise<void> {
  const scenario = await loadScenario();
  const vm = new ConsoleViewModel({
    tensionDisplayMax: scenario?.tension_display_max ?? 2.0,
    rcmToleranceM: scenario?.rcm_tolerance_m ?? 1e-3,
  });
  const url = `ws://${location.hostname}:${WS_PORT}`;
  const client = new BusClient(url, vm);
  client.connect();

  const sideView = new SideView(el<HTMLCanvasElement>("side-view"), scenario);
  const statusEl = el<HTMLSpanElement>("conn-status");
  const badgeEl = el<HTMLSpanElement>("mode-badge");
  const rcmEl = el<HTMLSpanElement>("rcm-indicator");
  const telemetryEl = el<HTMLDivElement>("telemetry");
  const gaugeFill = el<HTMLDivElement>("gauge-fill");
  const gaugeLabel = el<HTMLSpanElement>("gauge-label");
  const logEl = el<HTMLUListElement>("log");
  const input = el<HTMLInputElement>("inject-input");
  const sendBtn = el<HTMLButtonElement>("inject-send");
  const stopBtn = el<HTMLButtonElement>("estop");

  const submitInjection = () => {
    if (client.sendInjection(input.value)) input.value = "";
  };
  sendBtn.onclick = submitInjection;
  input.onkeydown = (event) => {
    if (event.key === "Enter") submitInjection();
  };
  stopBtn.onclick = () => {
    client.emergencyStop();
  };

  function render(): void {
    statusEl.textContent = vm.connection;
    statusEl.className = `status ${vm.connection}`;
    badgeEl.textContent = vm.sessionBadge;
    badgeEl.className = `badge ${vm.sessionBadge}`;
    rcmEl.className = `dot ${vm.rcmIndicator}`;

    const s = vm.lastState;
    if (s) {
      telemetryEl.innerHTML = [
        `tip [${s.tool_tip_position.map((v) => fmt(v)).join(", ")}] m`,
        `rcm error ${(s.rcm_error * 1e3).toFixed(3)} mm`,
        `gripper ${(s.gripper_aperture * 100).toFixed(0)}%`,
        `pull ${(s.pull_displacement * 1e3).toFixed(1)} mm`,
        `joints [${s.joint_positions.map((v) => v.toFixed(2)).join(", ")}]`,
      ]
        .map((line) => `<div>${line}</div>`)
        .join("");
      const frac = vm.tensionGauge / vm.tensionDisplayMax;
      gaugeFill.style.width = `${(frac * 100).toFixed(1)}%`;
      gaugeLabel.textContent = `${s.tension.toFixed(2)} N`;
    }

    sendBtn.disabled = !vm.canSendMotion;
    input.disabled = !vm.canSendAnything;
    stopBtn.disabled = !vm.canSendAnything;
    stopBtn.classList.toggle("locked", vm.motionLocked);

    const items = vm.log
      .slice(-30)
      .reverse()
      .map(
        (entry) =>
          `<li class="${entry.accepted ? "ok" : "bad"}">` +
          `<span class="stamp">${(entry.stampMs / 1000).toFixed(2)}s</span> ` +
          `${entry.summary}</li>`,
      );
    logEl.innerHTML = items.join("");

    sideView.draw(vm.lastState);
    requestAnimationFrame(render);
  }
  requestAnimationFrame(render);
}

void start();
