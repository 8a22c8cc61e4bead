#!/usr/bin/env python3
"""Measure transcript-to-dispatch latency of the in-process pipeline.

Pushes N alternating pull commands through the full match/session/verify
path on the replay backend and prints percentile statistics. This isolates
the artifact's own overhead from ASR decode time, which dominates any live
deployment's end-to-end figure.

Usage: python scripts/pipeline_latency.py [--config config.toml] [--n 200]
"""

import argparse
import tempfile
from pathlib import Path

import numpy as np

from voicebridge.asr_gateway import ReplaySource
from voicebridge.config import load_config
from voicebridge.runtime import ControlStack, replay_transcripts


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--config", default="config.toml")
    parser.add_argument("--n", type=int, default=200)
    args = parser.parse_args()

    config = load_config(args.config)
    lines = ["0\they robot"]
    for k in range(args.n):
        text = "pull more" if k % 2 == 0 else "pull less"
        lines.append(f"{(k + 1) * 100}\t{text}")

    with tempfile.TemporaryDirectory() as tmp:
        script = Path(tmp) / "commands.txt"
        script.write_text("\n".join(lines) + "\n", encoding="utf-8")
        stack = ControlStack(config, virtual_time=True)
        replay_transcripts(stack, ReplaySource(script), wait=False)

    lat = np.array(stack.pipeline_latencies_ms)
    print(f"commands dispatched: {lat.size}")
    for label, value in (
        ("mean", lat.mean()),
        ("p50", np.percentile(lat, 50)),
        ("p95", np.percentile(lat, 95)),
        ("p99", np.percentile(lat, 99)),
        ("max", lat.max()),
    ):
        print(f"{label:>5}: {value:8.3f} ms")


if __name__ == "__main__":
    main()
