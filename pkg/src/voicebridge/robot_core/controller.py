"""Robot-side command intake: vocabulary check, achievability, execution queue.

Commands arrive as canonical phrase strings (the wire carries a string, not
a structured action). The controller expands a phrase to its action
sequence, verifies the whole sequence has IK solutions from the projected
end-of-queue state, and only then enqueues it. Halting commands bypass the
queue: they cancel active motion and drop pending actions immediately.
"""

from __future__ import annotations

from collections import deque

from voicebridge.lexicon import Command
from voicebridge.robot_core.ik import NotReachableError
from voicebridge.robot_core.simulator import RobotSimulator, RobotState
from voicebridge.session import ActionKind, RobotAction, SessionConfig, SessionMode, handle_command

__all__ = ["RobotController"]

_PHRASE_TO_COMMAND = {c.phrase: c for c in Command}


class RobotController:
    def __init__(self, simulator: RobotSimulator, session_cfg: SessionConfig):
        self.sim = simulator
        self.session_cfg = session_cfg
        self._queue: deque[RobotAction] = deque()
        self._projected_q = simulator.joint_positions
        self._projected_disp = simulator.pull_displacement
        self._rejected_at_execute = 0  # defensive counter; planning is verified

    @property
    def busy(self) -> bool:
        return bool(self._queue) or self.sim.busy

    @property
    def pending_actions(self) -> int:
        return len(self._queue)

    def submit_command(self, command: str) -> tuple[bool, str]:
        """Synchronously validate and enqueue one command string.

        Returns (accepted, reason); reason is empty exactly when accepted.
        """
        cmd = _PHRASE_TO_COMMAND.get(command)
        if cmd is None:
            return False, "unknown action"
        # The session already gated by mode; expansion here is the Active row.
        _, actions = handle_command(SessionMode.ACTIVE, cmd, self.session_cfg)

        if any(a.kind is ActionKind.HALT for a in actions):
            self.halt_now()
            actions = [a for a in actions if a.kind is not ActionKind.HALT]

        try:
            q = self._projected_q
            disp = self._projected_disp
            for action in actions:
                planned = self.sim.plan_action(action, q, disp)
                q = planned.q_end
                disp = planned.pull_displacement
        except NotReachableError:
            return False, "not achievable"

        self._queue.extend(actions)
        self._projected_q = q
        self._projected_disp = disp
        return True, ""

    def halt_now(self) -> None:
        """Priority lane: drop queued actions and stop motion immediately."""
        self._queue.clear()
        self.sim.halt()
        self._projected_q = self.sim.joint_positions
        self._projected_disp = self.sim.pull_displacement

    def tick(self, dt: float | None = None) -> RobotState:
        """Feed the next queued action once idle, then advance the simulator."""
        if not self.sim.busy and self._queue:
            action = self._queue.popleft()
            try:
                self.sim.execute_action(action)
            except NotReachableError:
                # Verified at submit from the same state; only numerically
                # pathological chains can land here. Drop and continue.
                self._rejected_at_execute += 1
        state = self.sim.step(dt)
        if not self.busy:
            self._projected_q = self.sim.joint_positions
            self._projected_disp = self.sim.pull_displacement
        return state

    def drain(self, max_ticks: int = 1_000_000) -> RobotState:
        """Step until the queue and all motion are finished (test helper)."""
        state = self.sim.state()
        for _ in range(max_ticks):
            if not self.busy:
                return state
            state = self.tick()
        raise RuntimeError("controller did not drain within the tick budget")
