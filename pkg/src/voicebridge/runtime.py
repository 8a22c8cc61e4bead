"""Composition of the full stack plus the replay, demo, and live drivers.

The stack keeps the paper's two-node shape: recognition/mapping on one
side, robot control on the other, joined by the service-bus message types.
Voice transcripts and injected text merge into one serial command stream
(a lock gives the total order); the robot loop is the only writer of robot
state. Replay and demo drive the simulation on a virtual clock so their
event logs are deterministic.
"""

from __future__ import annotations

import itertools
import threading
import time
from dataclasses import dataclass, field
from typing import Callable, TextIO

from voicebridge.asr_gateway import ReplaySource, Transcript
from voicebridge.config import GlobalConfig
from voicebridge.lexicon import COMMANDS, Command, MatchResult, match_text
from voicebridge.robot_core.controller import RobotController
from voicebridge.robot_core.kinematics import load_chain
from voicebridge.robot_core.simulator import RobotSimulator, RobotState, load_scenario
from voicebridge.service_bus import (
    ActionRequest,
    ActionResponse,
    Frame,
    MatchResultFrame,
    StateUpdate,
    TranscriptFrame,
    encode_frame,
)
from voicebridge.session import SessionConfig, SessionEngine, SessionMode, handle_command

__all__ = [
    "ControlStack",
    "EventLog",
    "replay_transcripts",
    "DemoStepError",
    "run_demo",
    "DEMO_SEQUENCE",
]

_PHRASE_TO_COMMAND = {c.phrase: c for c in Command}
_MOTION_COMMANDS = {Command.TENSE, Command.RELEASE, Command.PULL_MORE, Command.PULL_LESS}


class ControlStack:
    """Lexicon -> session -> controller -> simulator, emitting bus frames."""

    def __init__(self, config: GlobalConfig, virtual_time: bool = False):
        chain = load_chain(config.chain_file)
        scenario = load_scenario(config.scenario_file)
        session_cfg = SessionConfig(
            grasp_pose=scenario.grasp_pose,
            pull_axis=scenario.pull_axis,
            pull_step=scenario.pull_step,
        )
        self.config = config
        self.scenario = scenario
        self.sim = RobotSimulator(chain, scenario, tick=config.sim_tick)
        self.controller = RobotController(self.sim, session_cfg)
        self.session = SessionEngine(session_cfg)
        self.virtual_time = virtual_time
        # Virtual runs need deterministic ids; live runs seed from the wall
        # clock so a restarted stack never reuses ids observers already saw.
        self._request_ids = itertools.count(
            1 if virtual_time else int(time.time() * 1e3)
        )
        self._emitters: list[Callable[[Frame], None]] = []
        self._lock = threading.RLock()
        self.pipeline_latencies_ms: list[float] = []

    def clock_ms(self) -> float:
        """Simulation time when running virtually, wall time when live."""
        return self.sim.sim_time * 1e3 if self.virtual_time else time.time() * 1e3

    # -- wiring --------------------------------------------------------------

    def subscribe(self, emitter: Callable[[Frame], None]) -> None:
        self._emitters.append(emitter)

    def _emit(self, frame: Frame) -> None:
        for emitter in self._emitters:
            emitter(frame)

    # -- command pipeline ----------------------------------------------------

    def process_transcript(self, transcript: Transcript) -> MatchResult:
        with self._lock:
            self._emit(
                TranscriptFrame(
                    text=transcript.text,
                    t_utterance_end=transcript.t_utterance_end,
                    t_transcript_ready=transcript.t_transcript_ready,
                    backend_id=transcript.backend_id,
                )
            )
            return self.process_text(transcript.text)

    def process_text(self, text: str) -> MatchResult:
        """Match one utterance and drive the session; the serial core path."""
        with self._lock:
            ingest = time.perf_counter()
            result = match_text(text, COMMANDS, self.config.lexicon)
            self._emit(
                MatchResultFrame(
                    stamp_ms=self.clock_ms(),
                    text=text,
                    command=result.command.phrase if result.command else None,
                    wer=result.wer,
                    threshold=result.threshold_used,
                    accepted=result.accepted,
                    reason=result.rejection_reason.value,
                )
            )
            if not result.accepted:
                return result
            actions = self.session.apply(result.command)
            if actions:
                request = ActionRequest(
                    id=next(self._request_ids),
                    command=result.command.phrase,
                    stamp_ms=self.clock_ms(),
                )
                self.pipeline_latencies_ms.append(
                    (time.perf_counter() - ingest) * 1e3
                )
                self._emit(request)
                accepted, reason = self.controller.submit_command(request.command)
                self._emit(ActionResponse(id=request.id, accepted=accepted, reason=reason))
            return result

    # -- BusHandler interface --------------------------------------------------

    def handle_inject(self, text: str, timeout_s: float) -> MatchResultFrame | None:
        """Injected text runs the exact same path as a spoken transcript."""
        if not self._lock.acquire(timeout=timeout_s):
            return None
        try:
            self.process_text(text)
        finally:
            self._lock.release()
        return None

    def handle_action_request(
        self, request: ActionRequest, timeout_s: float
    ) -> ActionResponse:
        """Direct service call carrying a command string from an external client."""
        if not self._lock.acquire(timeout=timeout_s):
            return ActionResponse(id=request.id, accepted=False, reason="timeout")
        try:
            cmd = _PHRASE_TO_COMMAND.get(request.command)
            if cmd is None:
                return ActionResponse(
                    id=request.id, accepted=False, reason="unknown action"
                )
            new_mode, actions = handle_command(
                self.session.mode, cmd, self.session.cfg
            )
            if cmd in _MOTION_COMMANDS and not actions:
                # Motion command while not armed: refuse rather than no-op.
                return ActionResponse(id=request.id, accepted=False, reason="not armed")
            self.session.mode = new_mode
            if not actions:
                return ActionResponse(id=request.id, accepted=True, reason="")
            accepted, reason = self.controller.submit_command(cmd.phrase)
            return ActionResponse(id=request.id, accepted=accepted, reason=reason)
        finally:
            self._lock.release()

    # -- robot loop ------------------------------------------------------------

    def tick(self, dt: float | None = None) -> RobotState:
        """One simulation tick; publishes a state update."""
        with self._lock:
            state = self.controller.tick(dt)
            self._emit(
                StateUpdate(
                    stamp_ms=self.clock_ms(),
                    session_mode=self.session.mode.value,
                    joint_positions=tuple(float(v) for v in state.joint_positions),
                    tool_tip_position=tuple(
                        float(v) for v in state.tool_tip_pose.position
                    ),
                    rcm_error=state.rcm_error,
                    gripper_aperture=state.gripper_aperture,
                    pull_displacement=state.pull_displacement,
                    tension=state.tension,
                )
            )
            return state

    def drain(self, extra_ticks: int = 0, max_ticks: int = 200_000) -> RobotState:
        """Tick until all queued motion finishes, plus an optional dwell."""
        state = self.sim.state()
        ticks = 0
        while self.controller.busy:
            state = self.tick()
            ticks += 1
            if ticks > max_ticks:
                raise RuntimeError("robot did not settle within the tick budget")
        for _ in range(extra_ticks):
            state = self.tick()
        return state


class EventLog:
    """JSON-lines event sink; state updates are tracked but not logged."""

    def __init__(self, sink: TextIO):
        self.sink = sink
        self.last_state: StateUpdate | None = None
        self._lock = threading.Lock()

    def __call__(self, frame: Frame) -> None:
        with self._lock:
            if isinstance(frame, StateUpdate):
                self.last_state = frame
                return
            self.sink.write(encode_frame(frame) + "\n")

    def write_final_state(self) -> None:
        with self._lock:
            if self.last_state is not None:
                self.sink.write(encode_frame(self.last_state) + "\n")
            self.sink.flush()


def replay_transcripts(
    stack: ControlStack,
    source: ReplaySource,
    wait: bool = False,
) -> list[MatchResult]:
    """Feed a replay file through the pipeline, pacing the simulation.

    Without ``wait`` the simulator advances on its virtual clock to each
    line's timestamp; with ``wait`` the driver also sleeps in wall time.
    """
    results: list[MatchResult] = []
    start_wall = time.monotonic()
    for transcript in source.transcripts():
        target_s = transcript.t_utterance_end / 1e3
        if wait:
            lag = target_s - (time.monotonic() - start_wall)
            if lag > 0:
                time.sleep(lag)
        while stack.sim.sim_time < target_s - 1e-9:
            stack.tick()
        results.append(stack.process_transcript(transcript))
    stack.drain(extra_ticks=10)
    return results


# -- scripted demo ------------------------------------------------------------

DEMO_SEQUENCE = ("hey robot", "tense", "pull more", "pull less", "release", "terminate")
DEMO_DWELL_TICKS = 50  # 0.5 s between commands


class DemoStepError(RuntimeError):
    def __init__(self, step: str, detail: str):
        super().__init__(f"demo failed at step {step!r}: {detail}")
        self.step = step


@dataclass
class DemoStep:
    index: int
    text: str
    mode_after: str
    accepted: bool
    wer: float
    rcm_worst: float
    pull_displacement: float
    tension: float


@dataclass
class DemoReport:
    steps: list[DemoStep] = field(default_factory=list)
    rcm_worst: float = 0.0
    halt_ticks: int | None = None

    def trace_lines(self) -> list[str]:
        lines = []
        for s in self.steps:
            lines.append(
                f"step {s.index}: {s.text!r} -> mode={s.mode_after} "
                f"accepted={s.accepted} wer={s.wer:.2f} "
                f"pull={s.pull_displacement * 1e3:.1f}mm "
                f"tension={s.tension:.2f}N rcm_worst={s.rcm_worst * 1e3:.3f}mm"
            )
        return lines


def run_demo(config: GlobalConfig, with_stop: bool = False) -> DemoReport:
    """Scripted tissue-tensioning sequence with per-tick RCM checking.

    Raises :class:`DemoStepError` naming the first step whose expectation
    fails. The ``with_stop`` variant interrupts a pull with "stop" and
    re-arms before finishing the script.
    """
    stack = ControlStack(config, virtual_time=True)
    tolerance = stack.scenario.rcm.tolerance
    report = DemoReport()
    rejections: list[ActionResponse] = []

    def watch_rejections(frame: Frame) -> None:
        if isinstance(frame, ActionResponse) and not frame.accepted:
            rejections.append(frame)

    stack.subscribe(watch_rejections)

    def checked_tick() -> RobotState:
        state = stack.tick()
        report.rcm_worst = max(report.rcm_worst, state.rcm_error)
        return state

    def run_step(index: int, text: str) -> DemoStep:
        result = stack.process_text(text)
        if rejections:
            raise DemoStepError(text, rejections[0].reason)
        worst = 0.0
        ticks = 0
        while stack.controller.busy:
            state = checked_tick()
            worst = max(worst, state.rcm_error)
            ticks += 1
            if ticks > 200_000:
                raise DemoStepError(text, "motion did not settle")
            if state.rcm_error > tolerance:
                raise DemoStepError(
                    text, f"RCM error {state.rcm_error:.2e} m exceeds {tolerance:.2e} m"
                )
        for _ in range(DEMO_DWELL_TICKS):
            checked_tick()
        step = DemoStep(
            index=index,
            text=text,
            mode_after=stack.session.mode.value,
            accepted=result.accepted,
            wer=result.wer,
            rcm_worst=worst,
            pull_displacement=stack.sim.pull_displacement,
            tension=stack.sim.tension,
        )
        report.steps.append(step)
        if not result.accepted:
            raise DemoStepError(text, f"command rejected ({result.rejection_reason.value})")
        return step

    script = list(DEMO_SEQUENCE)
    for index, text in enumerate(script, start=1):
        if with_stop and text == "pull less":
            # Interrupt the preceding settled state with a mid-motion stop:
            # start another pull, let it run a few ticks, then stop it.
            stack.process_text("pull more")
            for _ in range(3):
                checked_tick()
            if not stack.controller.busy:
                raise DemoStepError("stop", "expected a running trajectory to halt")
            stack.process_text("stop")
            halt_ticks = 0
            while bool(stack.sim.joint_velocities.any()):
                checked_tick()
                halt_ticks += 1
                if halt_ticks > 1:
                    break
            report.halt_ticks = halt_ticks
            if halt_ticks > 1:
                raise DemoStepError("stop", f"halt took {halt_ticks} ticks")
            if stack.session.mode is not SessionMode.HALTED:
                raise DemoStepError("stop", f"mode is {stack.session.mode.value}")
            stack.process_text("hey robot")
            if stack.session.mode is not SessionMode.ACTIVE:
                raise DemoStepError("hey robot", "re-arm failed")
        run_step(index, text)

    final = stack.sim.state()
    if stack.session.mode is not SessionMode.STANDBY:
        raise DemoStepError("terminate", f"final mode {stack.session.mode.value}")
    if final.gripper_aperture < 1.0 - 1e-9:
        raise DemoStepError("terminate", f"gripper not open ({final.gripper_aperture:.3f})")
    if final.pull_displacement != 0.0:
        raise DemoStepError(
            "terminate", f"pull displacement {final.pull_displacement} != 0"
        )
    if report.rcm_worst > tolerance:
        raise DemoStepError("rcm", f"worst RCM {report.rcm_worst:.2e} m over tolerance")
    return report
