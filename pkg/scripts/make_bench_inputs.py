#!/usr/bin/env python3
"""Generate benchmark input CSVs mirroring the evaluation protocol.

Writes a 7-command x 30-repetition x 2-speaker accuracy trial file (with a
configurable rate of corrupted transcripts) and a latency file whose
per-command means match the reference inference-time table exactly.

Usage: python scripts/make_bench_inputs.py [--out data] [--noise 0.05] [--seed 7]
"""

import argparse
import csv
import random
from pathlib import Path

from voicebridge.lexicon import COMMANDS

REFERENCE_MEANS_MS = {
    "hey robot": 1970,
    "tense": 1140,
    "release": 1420,
    "pull more": 2390,
    "pull less": 2500,
    "stop": 1290,
    "terminate": 1520,
}

CORRUPTIONS = {
    "hey robot": ["hey robots", "a robot", "hey"],
    "tense": ["tents", "dense", "ten"],
    "release": ["released", "please", "real ease"],
    "pull more": ["pull", "poll more", "pull-more please"],
    "pull less": ["pull", "full less", "pull last"],
    "stop": ["stopp", "top", "shop"],
    "terminate": ["terminated", "terminator", "term in eight"],
}


def write_trials(path: Path, noise: float, rng: random.Random) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["speaker_id", "expected", "transcript", "decode_latency_ms"])
        for speaker in ("s1", "s2"):
            for cmd in COMMANDS:
                for _ in range(30):
                    if rng.random() < noise:
                        text = rng.choice(CORRUPTIONS[cmd.phrase])
                    else:
                        text = cmd.phrase
                    latency = rng.gauss(REFERENCE_MEANS_MS[cmd.phrase], 150)
                    writer.writerow([speaker, cmd.phrase, text, f"{latency:.0f}"])


def write_latency(path: Path) -> None:
    """30 records per command; symmetric integer offsets keep means exact."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["command", "t_utterance_end_ms", "t_action_start_ms"])
        for cmd in COMMANDS:
            base = REFERENCE_MEANS_MS[cmd.phrase]
            for k in range(15):
                delta = 10 * (k + 1)
                writer.writerow([cmd.phrase, 0, base - delta])
                writer.writerow([cmd.phrase, 0, base + delta])


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--out", default="data", help="output directory")
    parser.add_argument("--noise", type=float, default=0.05,
                        help="fraction of corrupted transcripts")
    parser.add_argument("--seed", type=int, default=7)
    args = parser.parse_args()

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    rng = random.Random(args.seed)
    trials = out / "trials_7x30x2.csv"
    latency = out / "latency_reference.csv"
    write_trials(trials, args.noise, rng)
    write_latency(latency)
    print(f"wrote {trials}")
    print(f"wrote {latency}")


if __name__ == "__main__":
    main()
