import numpy as np
import pytest

from voicebridge.lexicon import Command
from voicebridge.robot_core.kinematics import Pose
from voicebridge.session import (
    ActionKind,
    RobotAction,
    SessionConfig,
    SessionEngine,
    SessionMode,
    accumulate_pull,
    handle_command,
)

STEP = 0.005


@pytest.fixture
def cfg():
    return SessionConfig(
        grasp_pose=Pose(np.array([0.3, 0.0, 0.2]), np.array([1.0, 0.0, 0.0, 0.0])),
        pull_axis=np.array([0.0, 0.0, 1.0]),
        pull_step=STEP,
    )


def kinds(actions):
    return [a.kind for a in actions]


# The full 3x7 transition table: (mode, command) -> (new mode, action kinds).
R, G, O, P, H = (
    ActionKind.REACH,
    ActionKind.GRASP,
    ActionKind.OPEN_GRIPPER,
    ActionKind.PULL,
    ActionKind.HALT,
)
S, A, X = SessionMode.STANDBY, SessionMode.ACTIVE, SessionMode.HALTED

TRANSITION_TABLE = {
    (S, Command.HEY_ROBOT): (A, []),
    (S, Command.TENSE): (S, []),
    (S, Command.RELEASE): (S, []),
    (S, Command.PULL_MORE): (S, []),
    (S, Command.PULL_LESS): (S, []),
    (S, Command.STOP): (S, []),
    (S, Command.TERMINATE): (S, []),
    (A, Command.HEY_ROBOT): (A, []),
    (A, Command.TENSE): (A, [R, G, P]),
    (A, Command.RELEASE): (A, [O]),
    (A, Command.PULL_MORE): (A, [P]),
    (A, Command.PULL_LESS): (A, [P]),
    (A, Command.STOP): (X, [H]),
    (A, Command.TERMINATE): (S, [H, O]),
    (X, Command.HEY_ROBOT): (A, []),
    (X, Command.TENSE): (X, []),
    (X, Command.RELEASE): (X, []),
    (X, Command.PULL_MORE): (X, []),
    (X, Command.PULL_LESS): (X, []),
    (X, Command.STOP): (X, []),
    (X, Command.TERMINATE): (S, []),
}


class TestTransitionTable:
    @pytest.mark.parametrize("mode,cmd", list(TRANSITION_TABLE))
    def test_entry(self, mode, cmd, cfg):
        expected_mode, expected_kinds = TRANSITION_TABLE[(mode, cmd)]
        new_mode, actions = handle_command(mode, cmd, cfg)
        assert new_mode is expected_mode
        assert kinds(actions) == expected_kinds

    def test_table_is_exhaustive(self):
        assert len(TRANSITION_TABLE) == 21

    def test_tense_expansion_details(self, cfg):
        _, actions = handle_command(A, Command.TENSE, cfg)
        assert actions[0].pose is cfg.grasp_pose
        assert actions[2].distance == pytest.approx(STEP)

    def test_pull_signs(self, cfg):
        _, more = handle_command(A, Command.PULL_MORE, cfg)
        _, less = handle_command(A, Command.PULL_LESS, cfg)
        assert more[0].distance == pytest.approx(STEP)
        assert less[0].distance == pytest.approx(-STEP)

    def test_determinism(self, cfg):
        for (mode, cmd) in TRANSITION_TABLE:
            first = handle_command(mode, cmd, cfg)
            second = handle_command(mode, cmd, cfg)
            assert first[0] is second[0]
            assert kinds(first[1]) == kinds(second[1])


class TestSafetySemantics:
    def test_stop_then_motion_commands_do_nothing(self, cfg):
        mode, actions = handle_command(A, Command.STOP, cfg)
        assert mode is X
        assert kinds(actions) == [H]
        for cmd in (Command.TENSE, Command.PULL_MORE, Command.PULL_LESS, Command.RELEASE):
            mode2, actions2 = handle_command(mode, cmd, cfg)
            assert mode2 is X
            assert actions2 == []

    def test_halted_rearms_only_via_hey_robot(self, cfg):
        mode, _ = handle_command(X, Command.HEY_ROBOT, cfg)
        assert mode is A

    def test_standby_inertness(self, cfg):
        for cmd in Command:
            if cmd is Command.HEY_ROBOT:
                continue
            mode, actions = handle_command(S, cmd, cfg)
            assert mode is S
            assert actions == []


class TestAccumulatePull:
    def test_additive(self):
        action = RobotAction(ActionKind.PULL, distance=STEP)
        assert accumulate_pull(STEP, action) == pytest.approx(2 * STEP)

    def test_back_to_grasp_point(self):
        action = RobotAction(ActionKind.PULL, distance=-STEP)
        assert accumulate_pull(STEP, action) == 0.0

    def test_clamped_at_zero(self):
        action = RobotAction(ActionKind.PULL, distance=-STEP)
        assert accumulate_pull(0.0, action) == 0.0

    def test_rejects_non_pull(self):
        with pytest.raises(ValueError):
            accumulate_pull(0.0, RobotAction(ActionKind.GRASP))

    def test_rejects_negative_displacement(self):
        with pytest.raises(ValueError):
            accumulate_pull(-0.001, RobotAction(ActionKind.PULL, distance=STEP))


class TestSessionEngine:
    def test_mode_tracking(self, cfg):
        engine = SessionEngine(cfg)
        assert engine.mode is S
        assert engine.apply(Command.HEY_ROBOT) == []
        assert engine.mode is A
        actions = engine.apply(Command.TENSE)
        assert kinds(actions) == [R, G, P]
        engine.apply(Command.STOP)
        assert engine.mode is X
        engine.apply(Command.TERMINATE)
        assert engine.mode is S
