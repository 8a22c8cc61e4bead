"""Acceptance suite: one test per release criterion, each printing a
PASS/FAIL line (run with ``pytest tests/test_acceptance.py -s`` to see them).

Everything runs against the replay backend and the shipped default chain,
scenario, and config; no ASR model and no network beyond loopback.
"""

import random
import time

import numpy as np
import pytest

from oracles import levenshtein_words
from test_session import TRANSITION_TABLE
from voicebridge.bench import (
    LabeledTrial,
    LatencyRecord,
    evaluate_accuracy,
    measure_latency,
)
from voicebridge.cli import main as cli_main
from voicebridge.lexicon import COMMANDS, Command, match_command, word_error_rate
from voicebridge.robot_core.ik import (
    POSITION_TOLERANCE,
    NotReachableError,
    solve_constrained_ik,
)
from voicebridge.robot_core.kinematics import (
    Pose,
    RcmConstraint,
    compute_frames,
    forward_kinematics,
    quat_from_axis_angle,
    quat_multiply,
    rcm_error,
)
from voicebridge.robot_core.trajectory import MotionLimits, plan_trajectory
from voicebridge.runtime import ControlStack, replay_transcripts, run_demo
from voicebridge.asr_gateway import ReplaySource
from voicebridge.service_bus import (
    ActionRequest,
    ActionResponse,
    InjectCommand,
    MatchResultFrame,
    StateUpdate,
    TranscriptFrame,
    decode_frame,
    encode_frame,
)
from voicebridge.session import SessionMode, handle_command


def report(number: int, name: str, detail: str = "") -> None:
    suffix = f" ({detail})" if detail else ""
    print(f"ACCEPTANCE {number} {name}: PASS{suffix}")


class TestCriterion1WerOracle:
    def test_wer_oracle_equivalence(self):
        rng = random.Random(90721)
        alphabet = ["a", "b", "c", "d", "e"]
        start = time.perf_counter()
        mismatches = 0
        for _ in range(10_000):
            hyp = [rng.choice(alphabet) for _ in range(rng.randint(0, 6))]
            ref = [rng.choice(alphabet) for _ in range(rng.randint(1, 6))]
            wer, stats = word_error_rate(hyp, ref)
            distance = levenshtein_words(hyp, ref)
            if stats.edit_distance != distance or wer != distance / len(ref):
                mismatches += 1
        elapsed = time.perf_counter() - start
        assert mismatches == 0
        assert elapsed < 5.0, f"took {elapsed:.2f}s"
        report(1, "WER oracle equivalence", f"10000 pairs, {elapsed:.2f}s")


class TestCriterion2LexiconSelfMatch:
    def test_self_match_and_cross_matrix(self):
        for cmd in COMMANDS:
            result = match_command(cmd.phrase_tokens)
            assert result.accepted and result.command is cmd and result.wer == 0.0

        phrases = [c.phrase_tokens for c in COMMANDS]
        n = len(phrases)
        matrix = np.zeros((n, n))
        for i in range(n):
            for j in range(n):
                wer, stats = word_error_rate(phrases[i], phrases[j])
                oracle = levenshtein_words(phrases[i], phrases[j])
                assert stats.edit_distance == oracle
                assert wer == oracle / len(phrases[j])
                matrix[i, j] = wer
        off_diag = matrix[~np.eye(n, dtype=bool)]
        assert off_diag.min() == 0.5
        argmins = np.argwhere((matrix == 0.5) & ~np.eye(n, dtype=bool))
        pair = {COMMANDS[i] for i, _ in argmins} | {COMMANDS[j] for _, j in argmins}
        assert pair == {Command.PULL_MORE, Command.PULL_LESS}
        report(2, "lexicon self-match + oracle matrix", "min off-diag 0.5")


class TestCriterion3StateMachine:
    def test_exhaustive_table(self, default_scenario):
        from voicebridge.session import SessionConfig

        cfg = SessionConfig(
            grasp_pose=default_scenario.grasp_pose,
            pull_axis=default_scenario.pull_axis,
            pull_step=default_scenario.pull_step,
        )
        checked = 0
        for mode in SessionMode:
            for cmd in Command:
                expected_mode, expected_kinds = TRANSITION_TABLE[(mode, cmd)]
                new_mode, actions = handle_command(mode, cmd, cfg)
                assert new_mode is expected_mode, (mode, cmd)
                assert [a.kind for a in actions] == expected_kinds, (mode, cmd)
                checked += 1
        assert checked == 21
        report(3, "state-machine table", "21/21 entries")


class TestCriterion4IkRcmSoundness:
    def test_random_reachable_targets(self, default_chain):
        rng = np.random.default_rng(42)
        chain = default_chain
        start = time.perf_counter()
        solved = 0
        for _ in range(100):
            q_seed = chain.clamp(chain.home + rng.uniform(-0.3, 0.3, size=10))
            frames = compute_frames(chain, q_seed)
            fraction = rng.uniform(0.3, 0.8)
            trocar = frames.shaft_base + fraction * (
                frames.shaft_tip - frames.shaft_base
            )
            constraint = RcmConstraint(trocar_point=trocar, tolerance=1e-3)
            offset = rng.normal(size=3)
            offset *= rng.uniform(0.0, 0.02) / np.linalg.norm(offset)
            new_tip = frames.shaft_tip + offset
            implied_axis = new_tip - trocar
            implied_axis /= np.linalg.norm(implied_axis)
            cross = np.cross(frames.shaft_axis, implied_axis)
            s = np.linalg.norm(cross)
            if s < 1e-12:
                orientation = frames.tip_pose.orientation
            else:
                c = float(frames.shaft_axis @ implied_axis)
                delta = quat_from_axis_angle(cross / s, np.arctan2(s, c))
                orientation = quat_multiply(delta, frames.tip_pose.orientation)
            target = Pose(new_tip, orientation)
            try:
                q = solve_constrained_ik(chain, target, constraint, q_seed)
            except NotReachableError:
                continue
            solved += 1
            # Verification is FK-based, independent of the solver's own view.
            pose, _ = forward_kinematics(chain, q)  # raises on limit violation
            assert np.linalg.norm(pose.position - target.position) <= POSITION_TOLERANCE
            assert rcm_error(chain, q, constraint) <= constraint.tolerance
            assert chain.within_limits(q)
        elapsed = time.perf_counter() - start
        assert elapsed < 10.0, f"took {elapsed:.2f}s"
        assert solved >= 95, f"only {solved}/100 targets solved"
        report(4, "IK/RCM soundness", f"{solved}/100 solved, {elapsed:.2f}s")


class TestCriterion5TrajectoryLimits:
    def test_velocity_bounds_and_analytic_duration(self, default_chain):
        limits = MotionLimits.from_chain(default_chain)
        rng = np.random.default_rng(1234)
        lower, upper = default_chain.lower_limits, default_chain.upper_limits
        for _ in range(1000):
            q_from = rng.uniform(lower, upper)
            q_to = rng.uniform(lower, upper)
            traj = plan_trajectory(q_from, q_to, limits)
            if len(traj.waypoints) < 2:
                continue
            qs = np.array([q for _, q in traj.waypoints])
            ts = np.array([t for t, _ in traj.waypoints])
            vels = np.abs(np.diff(qs, axis=0) / np.diff(ts)[:, None])
            assert np.all(vels <= limits.v_max[None, :] + 1e-9)

        single = MotionLimits(
            v_max=np.array([1.0]), a_max=np.array([1.0]),
            lower=np.array([-10.0]), upper=np.array([10.0]),
        )
        traj = plan_trajectory(np.array([0.0]), np.array([1.0]), single)
        assert abs(traj.duration - 2.0) < 1e-6
        report(5, "trajectory limits", "1000 pairs, triangular t=2.0")


class TestCriterion6EndToEndReplay:
    def test_replay_script_and_demo_exit_codes(self, default_config, tmp_path, capsys):
        script = tmp_path / "sequence.txt"
        script.write_text(
            "500\they robot\n1500\ttense\n4500\tpull more\n"
            "6000\tpull less\n7500\trelease\n9000\tterminate\n",
            encoding="utf-8",
        )
        stack = ControlStack(default_config, virtual_time=True)
        worst_rcm = [0.0]
        stack.subscribe(
            lambda f: worst_rcm.__setitem__(0, max(worst_rcm[0], f.rcm_error))
            if isinstance(f, StateUpdate)
            else None
        )
        results = replay_transcripts(stack, ReplaySource(script), wait=False)
        assert all(r.accepted for r in results)
        final = stack.sim.state()
        assert stack.session.mode is SessionMode.STANDBY
        assert final.gripper_aperture == 1.0
        assert final.pull_displacement == 0.0
        assert worst_rcm[0] <= 1e-3

        config_path = str(default_config.chain_file.parent.parent / "config.toml")
        assert cli_main(["--config", config_path, "demo"]) == 0
        capsys.readouterr()
        report_obj = run_demo(default_config, with_stop=True)
        assert report_obj.halt_ticks is not None and report_obj.halt_ticks <= 1
        report(
            6,
            "end-to-end replay + demo",
            f"worst rcm {worst_rcm[0] * 1e3:.3f} mm, halt ticks {report_obj.halt_ticks}",
        )


class TestCriterion7PipelineLatency:
    def test_p99_under_50ms(self, default_config, tmp_path):
        lines = ["0\they robot"]
        for k in range(200):
            text = "pull more" if k % 2 == 0 else "pull less"
            lines.append(f"{(k + 1) * 100}\t{text}")
        script = tmp_path / "latency.txt"
        script.write_text("\n".join(lines) + "\n", encoding="utf-8")
        stack = ControlStack(default_config, virtual_time=True)
        replay_transcripts(stack, ReplaySource(script), wait=False)
        latencies = np.array(stack.pipeline_latencies_ms)
        assert latencies.size == 200
        p99 = float(np.percentile(latencies, 99))
        assert p99 < 50.0, f"p99 {p99:.2f} ms"
        report(7, "pipeline latency", f"p99 {p99:.2f} ms over 200 commands")


TABLE_ROWS = [
    (Command.HEY_ROBOT, 1.97),
    (Command.TENSE, 1.14),
    (Command.RELEASE, 1.42),
    (Command.PULL_MORE, 2.39),
    (Command.PULL_LESS, 2.50),
    (Command.STOP, 1.29),
    (Command.TERMINATE, 1.52),
]


class TestCriterion8BenchFidelity:
    def test_latency_table_reproduction(self):
        records = []
        for cmd, mean_s in TABLE_ROWS:
            base = mean_s * 1000.0
            for k in range(15):
                delta = 10.0 * (k + 1)
                records.append(LatencyRecord(cmd, 0.0, base - delta))
                records.append(LatencyRecord(cmd, 0.0, base + delta))
        result = measure_latency(records)
        assert [r.command for r in result.rows] == [cmd for cmd, _ in TABLE_ROWS]
        for row, (_, mean_s) in zip(result.rows, TABLE_ROWS):
            assert round(row.mean_s, 2) == mean_s
        assert abs(result.pooled_mean_s - 1.75) <= 0.01
        text_rows = [l.split() for l in result.to_text().split("\n")[3:10]]
        assert [" ".join(r[:-1]) for r in text_rows] == [c.phrase for c, _ in TABLE_ROWS]

        trials = [
            LabeledTrial(expected=cmd, transcript_text=cmd.phrase, speaker_id=speaker)
            for speaker in ("s1", "s2")
            for cmd, _ in TABLE_ROWS
            for _ in range(30)
        ]
        accuracy = evaluate_accuracy(trials)
        assert len(accuracy.rows) == 7
        for row in accuracy.rows:
            assert row.trials == 60 and row.correct == 60
        assert len(accuracy.to_csv().strip().split("\n")) == 8
        report(8, "bench report fidelity", f"pooled {result.pooled_mean_s:.3f}s")


class TestCriterion9WireRoundTrip:
    def test_thousand_random_frames(self):
        rng = random.Random(555)

        def rand_text():
            return "".join(
                rng.choice("abcdefghij xyz'!.") for _ in range(rng.randint(0, 20))
            )

        def rand_float():
            return rng.choice(
                [0.0, -1.5, 3.14159, rng.uniform(-1e6, 1e6), rng.uniform(-1, 1)]
            )

        builders = [
            lambda: ActionRequest(
                id=rng.randint(0, 2**31), command=rand_text() or "x",
                stamp_ms=rand_float(),
            ),
            lambda: ActionResponse(
                id=rng.randint(0, 2**31),
                accepted=(acc := rng.random() < 0.5),
                reason="" if acc else rand_text() or "why",
            ),
            lambda: StateUpdate(
                stamp_ms=rand_float(),
                session_mode=rng.choice(["standby", "active", "halted"]),
                joint_positions=tuple(rand_float() for _ in range(10)),
                tool_tip_position=tuple(rand_float() for _ in range(3)),
                rcm_error=rand_float(),
                gripper_aperture=rand_float(),
                pull_displacement=rand_float(),
                tension=rand_float(),
            ),
            lambda: TranscriptFrame(
                text=rand_text(),
                t_utterance_end=(t := abs(rand_float())),
                t_transcript_ready=t + abs(rand_float()),
                backend_id=rng.choice(["replay", "subprocess", "http"]),
            ),
            lambda: InjectCommand(text=rand_text()),
            lambda: MatchResultFrame(
                stamp_ms=rand_float(),
                text=rand_text(),
                command=rng.choice([None, "tense", "pull more"]),
                wer=abs(rand_float()),
                threshold=0.6,
                accepted=rng.random() < 0.5,
                reason=rand_text(),
            ),
        ]
        failures = 0
        for i in range(1000):
            frame = builders[i % len(builders)]()
            if decode_frame(encode_frame(frame)) != frame:
                failures += 1
        assert failures == 0
        report(9, "wire round-trip", "1000 frames, 0 failures")
