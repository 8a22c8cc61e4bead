"""Command-line entry point wiring configuration, drivers, and services.

Subcommands: run (live stack with bus + dashboard), replay (deterministic
pipeline over a transcript file), demo (scripted tensioning sequence),
bench accuracy|latency (report generation), kin fk|ik (debug helpers).

Exit codes: 0 success, 1 runtime/assertion failure, 2 configuration or
input-file problems, 3 ASR backend unavailable at startup.
"""

from __future__ import annotations

import argparse
import functools
import http.server
import json
import shutil
import sys
import threading
import time
from pathlib import Path

import numpy as np

from voicebridge.asr_gateway import (
    AudioPipeline,
    BackendUnavailableError,
    HttpBackend,
    ReplayFormatError,
    ReplaySource,
    SubprocessBackend,
    read_wav_chunks,
)
from voicebridge.bench import (
    evaluate_accuracy,
    measure_latency,
    read_latency_csv,
    read_trials_csv,
)
from voicebridge.config import ConfigError, GlobalConfig, config_path_from_env, load_config
from voicebridge.robot_core.ik import NotReachableError, solve_constrained_ik
from voicebridge.robot_core.kinematics import Pose, forward_kinematics, load_chain, rcm_error
from voicebridge.robot_core.simulator import load_scenario
from voicebridge.runtime import ControlStack, DemoStepError, EventLog, replay_transcripts, run_demo
from voicebridge.service_bus import ServiceBus

EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_CONFIG = 2
EXIT_BACKEND = 3


def _load_config_or_exit(args) -> GlobalConfig:
    path = config_path_from_env(args.config)
    try:
        return load_config(path)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        raise SystemExit(EXIT_CONFIG)


def _open_log(args):
    if args.log:
        return open(args.log, "w", encoding="utf-8")
    return sys.stdout


# -- run ----------------------------------------------------------------------


class _QuietFileHandler(http.server.SimpleHTTPRequestHandler):
    scenario_json: bytes = b"{}"

    def log_message(self, *args) -> None:
        pass

    def do_GET(self) -> None:
        # Task context (trocar etc.) for the side view; not live state.
        if self.path.split("?")[0] == "/scenario.json":
            self.send_response(200)
            self.send_header("Content-Type", "application/json")
            self.send_header("Content-Length", str(len(self.scenario_json)))
            self.end_headers()
            self.wfile.write(self.scenario_json)
            return
        super().do_GET()


def _serve_dashboard(
    root: Path, port: int, scenario_json: bytes
) -> http.server.ThreadingHTTPServer | None:
    if not root.is_dir():
        print(f"dashboard root {root} not found; skipping static server", file=sys.stderr)
        return None
    handler = type("BoundHandler", (_QuietFileHandler,), {"scenario_json": scenario_json})
    server = http.server.ThreadingHTTPServer(
        ("127.0.0.1", port), functools.partial(handler, directory=str(root))
    )
    threading.Thread(target=server.serve_forever, daemon=True).start()
    print(f"dashboard: http://127.0.0.1:{port}/", file=sys.stderr)
    return server


def _check_backend(config: GlobalConfig) -> None:
    be = config.backend
    if be.kind == "replay":
        if not Path(be.replay_file).is_file():
            raise ConfigError(f"replay file not found: {be.replay_file}")
    elif be.kind == "subprocess":
        if shutil.which(be.command[0]) is None and not Path(be.command[0]).is_file():
            raise BackendUnavailableError(f"backend executable not found: {be.command[0]}")
    elif be.kind == "http":
        HttpBackend(be.url, be.deadline_s).check_reachable()
    if be.kind != "replay" and config.audio_file is not None:
        if not Path(config.audio_file).is_file():
            raise ConfigError(f"audio file not found: {config.audio_file}")


def cmd_run(args) -> int:
    config = _load_config_or_exit(args)
    try:
        _check_backend(config)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except BackendUnavailableError as exc:
        print(f"backend unavailable: {exc}", file=sys.stderr)
        return EXIT_BACKEND

    stack = ControlStack(config)
    bus = ServiceBus(stack, config.bus.tcp_port, config.bus.ws_port)
    stack.subscribe(bus.publish)
    log_file = open(args.log, "w", encoding="utf-8") if args.log else None
    event_log = EventLog(log_file) if log_file else None
    if event_log:
        stack.subscribe(event_log)

    bus.start()
    print(
        f"bus: tcp://127.0.0.1:{bus.tcp_port} ws://127.0.0.1:{bus.ws_port}",
        file=sys.stderr,
    )
    dashboard = None
    if config.bus.dashboard_root is not None:
        scenario = stack.scenario
        scenario_json = json.dumps(
            {
                "trocar_point": list(scenario.rcm.trocar_point),
                "rcm_tolerance_m": scenario.rcm.tolerance,
                "grasp_position": list(scenario.grasp_pose.position),
                "tension_display_max": scenario.k_spring * 8 * scenario.pull_step,
            }
        ).encode("utf-8")
        dashboard = _serve_dashboard(
            config.bus.dashboard_root, config.bus.dashboard_port, scenario_json
        )

    stop = threading.Event()

    def robot_loop() -> None:
        period = config.sim_tick
        next_tick = time.monotonic()
        while not stop.is_set():
            stack.tick()
            next_tick += period
            delay = next_tick - time.monotonic()
            if delay > 0:
                time.sleep(delay)
            else:
                next_tick = time.monotonic()

    loop_thread = threading.Thread(target=robot_loop, name="robot-loop", daemon=True)
    loop_thread.start()

    def feed_replay() -> None:
        source = ReplaySource(config.backend.replay_file)
        start = time.monotonic()
        for transcript in source.transcripts():
            lag = transcript.t_utterance_end / 1e3 - (time.monotonic() - start)
            if lag > 0:
                stop.wait(timeout=lag)
            if stop.is_set():
                return
            stack.process_transcript(transcript)
        while stack.controller.busy and not stop.is_set():
            time.sleep(config.sim_tick)
        stop.set()  # replay input exhausted: clean shutdown

    def feed_audio() -> None:
        be = config.backend
        backend = (
            SubprocessBackend(list(be.command), be.deadline_s)
            if be.kind == "subprocess"
            else HttpBackend(be.url, be.deadline_s)
        )
        pipeline = AudioPipeline(backend, config.endpoint)
        if config.audio_file is None:
            print("no audio.file configured; commands come from the bus only",
                  file=sys.stderr)
            return
        for transcript in pipeline.run(read_wav_chunks(config.audio_file)):
            if stop.is_set():
                return
            stack.process_transcript(transcript)
        # A file-fed stream is finite input, like replay: drain and exit.
        while stack.controller.busy and not stop.is_set():
            time.sleep(config.sim_tick)
        stop.set()

    feeder = threading.Thread(
        target=feed_replay if config.backend.kind == "replay" else feed_audio,
        name="gateway",
        daemon=True,
    )
    feeder.start()

    try:
        while not stop.wait(timeout=0.2):
            pass
    except KeyboardInterrupt:
        stop.set()
    feeder.join(timeout=2.0)
    loop_thread.join(timeout=2.0)
    bus.stop()
    if dashboard:
        dashboard.shutdown()
    if event_log:
        event_log.write_final_state()
    if log_file:
        log_file.close()
    return EXIT_OK


# -- replay ---------------------------------------------------------------------


def cmd_replay(args) -> int:
    config = _load_config_or_exit(args)
    try:
        source = ReplaySource(args.transcript_file)
    except FileNotFoundError:
        print(f"replay file not found: {args.transcript_file}", file=sys.stderr)
        return EXIT_CONFIG
    except ReplayFormatError as exc:
        print(f"replay error: {exc}", file=sys.stderr)
        return EXIT_CONFIG

    stack = ControlStack(config, virtual_time=True)
    sink = _open_log(args)
    event_log = EventLog(sink)
    stack.subscribe(event_log)
    replay_transcripts(stack, source, wait=not args.no_wait)
    event_log.write_final_state()
    if sink is not sys.stdout:
        sink.close()
    return EXIT_OK


# -- demo -----------------------------------------------------------------------


def cmd_demo(args) -> int:
    config = _load_config_or_exit(args)
    try:
        report = run_demo(config, with_stop=args.with_stop)
    except DemoStepError as exc:
        print(f"FAIL {exc}", file=sys.stderr)
        return EXIT_FAILURE
    for line in report.trace_lines():
        print(line)
    extra = (
        f" halt_ticks={report.halt_ticks}" if report.halt_ticks is not None else ""
    )
    print(
        f"demo ok: {len(report.steps)} commands, worst rcm "
        f"{report.rcm_worst * 1e3:.3f} mm{extra}"
    )
    return EXIT_OK


# -- bench ----------------------------------------------------------------------


def _write_reports(out_dir: Path, stem: str, csv_text: str, table_text: str) -> None:
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / f"{stem}.csv").write_text(csv_text, encoding="utf-8")
    (out_dir / f"{stem}.txt").write_text(table_text, encoding="utf-8")


def cmd_bench(args) -> int:
    path = Path(args.input)
    if not path.is_file():
        print(f"input file not found: {path}", file=sys.stderr)
        return EXIT_CONFIG
    out_dir = Path(args.out)
    try:
        if args.bench_kind == "accuracy":
            report = evaluate_accuracy(read_trials_csv(path))
            _write_reports(out_dir, "accuracy", report.to_csv(), report.to_text())
            print(report.to_text())
        else:
            report = measure_latency(read_latency_csv(path))
            _write_reports(out_dir, "latency", report.to_csv(), report.to_text())
            print(report.to_text())
    except (ValueError, KeyError) as exc:
        print(f"bench input error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    return EXIT_OK


# -- kin ------------------------------------------------------------------------


def _parse_vector(text: str, expected_len: int | None = None) -> np.ndarray:
    values = np.array([float(v) for v in text.split(",")])
    if expected_len is not None and values.size != expected_len:
        raise ValueError(f"expected {expected_len} comma-separated values")
    return values


def cmd_kin(args) -> int:
    config = _load_config_or_exit(args)
    chain = load_chain(config.chain_file)
    scenario = load_scenario(config.scenario_file)
    q0 = chain.home if args.q is None else _parse_vector(args.q, chain.n_joints)
    if args.kin_kind == "fk":
        pose, (base, tip) = forward_kinematics(chain, q0)
        print(
            json.dumps(
                {
                    "tip_position": [round(v, 9) for v in pose.position],
                    "tip_orientation_wxyz": [round(v, 9) for v in pose.orientation],
                    "shaft_base": [round(v, 9) for v in base],
                    "shaft_tip": [round(v, 9) for v in tip],
                    "rcm_error_m": round(rcm_error(chain, q0, scenario.rcm), 9),
                }
            )
        )
        return EXIT_OK
    # ik
    target_pos = _parse_vector(args.position, 3)
    pose0, _ = forward_kinematics(chain, q0)
    orientation = (
        pose0.orientation
        if args.orientation is None
        else _parse_vector(args.orientation, 4)
    )
    target = Pose(target_pos, orientation / np.linalg.norm(orientation))
    try:
        q = solve_constrained_ik(chain, target, scenario.rcm, q0)
    except NotReachableError as exc:
        print(f"not reachable: {exc}", file=sys.stderr)
        return EXIT_FAILURE
    print(json.dumps({"joints": [round(v, 9) for v in q]}))
    return EXIT_OK


# -- parser ----------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    # --config/--log parse both before and after the subcommand; SUPPRESS
    # keeps an unset subparser flag from clobbering a main-level value.
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument(
        "--config", "-c", default=argparse.SUPPRESS, help="path to config.toml"
    )
    common.add_argument(
        "--log", default=argparse.SUPPRESS, help="write JSON event lines here"
    )

    parser = argparse.ArgumentParser(
        prog="voicebridge",
        description="Voice-command control stack for a simulated surgical assistant",
        parents=[common],
    )
    sub = parser.add_subparsers(dest="command", required=True)

    sub.add_parser(
        "run",
        help="start bus, robot loop, and the configured gateway",
        parents=[common],
    )

    p_replay = sub.add_parser(
        "replay", help="feed a transcript file through the pipeline", parents=[common]
    )
    p_replay.add_argument("transcript_file")
    p_replay.add_argument(
        "--no-wait", action="store_true", help="ignore timestamps; run flat out"
    )

    p_demo = sub.add_parser(
        "demo", help="scripted tissue-tensioning sequence", parents=[common]
    )
    p_demo.add_argument(
        "--with-stop", action="store_true", help="interrupt mid-sequence with stop"
    )

    p_bench = sub.add_parser("bench", help="accuracy / latency reports", parents=[common])
    bench_sub = p_bench.add_subparsers(dest="bench_kind", required=True)
    for kind in ("accuracy", "latency"):
        p = bench_sub.add_parser(kind, parents=[common])
        p.add_argument("input", help="input CSV file")
        p.add_argument("--out", default="reports", help="report output directory")

    p_kin = sub.add_parser("kin", help="kinematics debug helpers", parents=[common])
    kin_sub = p_kin.add_subparsers(dest="kin_kind", required=True)
    p_fk = kin_sub.add_parser("fk", parents=[common])
    p_fk.add_argument("--q", default=None, help="comma-separated joint vector")
    p_ik = kin_sub.add_parser("ik", parents=[common])
    p_ik.add_argument("--position", required=True, help="x,y,z target (m)")
    p_ik.add_argument("--orientation", default=None, help="w,x,y,z target quaternion")
    p_ik.add_argument("--q", default=None, help="comma-separated seed joint vector")

    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    args.config = getattr(args, "config", None)
    args.log = getattr(args, "log", None)
    handlers = {
        "run": cmd_run,
        "replay": cmd_replay,
        "demo": cmd_demo,
        "bench": cmd_bench,
        "kin": cmd_kin,
    }
    return handlers[args.command](args)


if __name__ == "__main__":
    sys.exit(main())
