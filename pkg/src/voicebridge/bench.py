"""Benchmark harness: per-command recognition accuracy and latency tables.

Accuracy runs labeled transcripts through the matcher (a trial counts as
correct only when the matcher accepts it AND picks the expected command;
rejections land in the confusion tally). Latency summarizes utterance-end
to action-start intervals per command, in seconds, in lexicon declaration
order, plus a pooled average row.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from voicebridge.lexicon import (
    COMMANDS,
    Command,
    LexiconConfig,
    match_text,
)

__all__ = [
    "LabeledTrial",
    "LatencyRecord",
    "AccuracyReport",
    "LatencyReport",
    "read_trials_csv",
    "read_latency_csv",
    "evaluate_accuracy",
    "measure_latency",
]

_PHRASE_TO_COMMAND = {c.phrase: c for c in Command}


@dataclass(frozen=True)
class LabeledTrial:
    expected: Command
    transcript_text: str
    speaker_id: str
    decode_latency_ms: float | None = None


@dataclass(frozen=True)
class LatencyRecord:
    command: Command
    t_utterance_end: float  # ms
    t_action_start: float  # ms

    def __post_init__(self) -> None:
        if self.t_action_start < self.t_utterance_end:
            raise ValueError("action cannot start before the utterance ends")

    @property
    def latency_s(self) -> float:
        return (self.t_action_start - self.t_utterance_end) / 1e3


@dataclass(frozen=True)
class CommandAccuracy:
    command: Command
    trials: int
    correct: int

    @property
    def accuracy(self) -> float:
        return self.correct / self.trials if self.trials else 0.0


@dataclass
class AccuracyReport:
    rows: list[CommandAccuracy]
    per_speaker: dict[str, list[CommandAccuracy]]
    confusion: dict[tuple[str, str], int]  # (expected phrase, outcome) -> count

    @property
    def pooled_accuracy(self) -> float:
        trials = sum(r.trials for r in self.rows)
        correct = sum(r.correct for r in self.rows)
        return correct / trials if trials else 0.0

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["command", "trials", "correct", "accuracy"])
        for row in self.rows:
            writer.writerow(
                [row.command.phrase, row.trials, row.correct, f"{row.accuracy:.4f}"]
            )
        return buf.getvalue()

    def to_text(self) -> str:
        lines = ["Recognition accuracy", ""]
        lines.append(f"{'Voice command':<14} {'Trials':>6} {'Correct':>8} {'Accuracy':>9}")
        for row in self.rows:
            lines.append(
                f"{row.command.phrase:<14} {row.trials:>6} {row.correct:>8} "
                f"{row.accuracy:>9.3f}"
            )
        lines.append(
            f"{'pooled':<14} {sum(r.trials for r in self.rows):>6} "
            f"{sum(r.correct for r in self.rows):>8} {self.pooled_accuracy:>9.3f}"
        )
        for speaker in sorted(self.per_speaker):
            lines.append("")
            lines.append(f"Speaker {speaker}")
            for row in self.per_speaker[speaker]:
                lines.append(
                    f"{row.command.phrase:<14} {row.trials:>6} {row.correct:>8} "
                    f"{row.accuracy:>9.3f}"
                )
        offdiag = {
            key: count
            for key, count in self.confusion.items()
            if key[0] != key[1] and count > 0
        }
        if offdiag:
            lines.append("")
            lines.append("Confusions (expected -> outcome)")
            for (expected, outcome), count in sorted(offdiag.items()):
                lines.append(f"{expected:<14} -> {outcome:<24} {count}")
        lines.append("")
        return "\n".join(lines)


@dataclass(frozen=True)
class LatencyStats:
    command: Command
    count: int
    mean_s: float
    min_s: float
    max_s: float
    p95_s: float


@dataclass
class LatencyReport:
    rows: list[LatencyStats]
    pooled_mean_s: float

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["command", "count", "mean_s", "min_s", "max_s", "p95_s"])
        for row in self.rows:
            writer.writerow(
                [
                    row.command.phrase,
                    row.count,
                    f"{row.mean_s:.4f}",
                    f"{row.min_s:.4f}",
                    f"{row.max_s:.4f}",
                    f"{row.p95_s:.4f}",
                ]
            )
        return buf.getvalue()

    def to_text(self) -> str:
        lines = ["Inference time (s) per voice command", ""]
        lines.append(f"{'Voice command':<14} {'Average time':>12}")
        for row in self.rows:
            lines.append(f"{row.command.phrase:<14} {row.mean_s:>12.2f}")
        lines.append(f"{'average':<14} {self.pooled_mean_s:>12.2f}")
        lines.append("")
        return "\n".join(lines)


def read_trials_csv(path: str | Path) -> list[LabeledTrial]:
    """Trial file: header speaker_id,expected,transcript,decode_latency_ms."""
    trials: list[LabeledTrial] = []
    with open(path, newline="", encoding="utf-8") as fh:
        for row in csv.DictReader(fh):
            expected = _PHRASE_TO_COMMAND.get(row["expected"])
            if expected is None:
                raise ValueError(f"unknown expected command {row['expected']!r}")
            raw_latency = (row.get("decode_latency_ms") or "").strip()
            trials.append(
                LabeledTrial(
                    expected=expected,
                    transcript_text=row["transcript"],
                    speaker_id=row["speaker_id"],
                    decode_latency_ms=float(raw_latency) if raw_latency else None,
                )
            )
    if not trials:
        raise ValueError(f"{path}: no trials found")
    return trials


def read_latency_csv(path: str | Path) -> list[LatencyRecord]:
    """Latency file: header command,t_utterance_end_ms,t_action_start_ms."""
    records: list[LatencyRecord] = []
    with open(path, newline="", encoding="utf-8") as fh:
        for row in csv.DictReader(fh):
            command = _PHRASE_TO_COMMAND.get(row["command"])
            if command is None:
                raise ValueError(f"unknown command {row['command']!r}")
            records.append(
                LatencyRecord(
                    command=command,
                    t_utterance_end=float(row["t_utterance_end_ms"]),
                    t_action_start=float(row["t_action_start_ms"]),
                )
            )
    if not records:
        raise ValueError(f"{path}: no records found")
    return records


def _tally(
    trials: list[LabeledTrial],
    lexicon: tuple[Command, ...],
    config: LexiconConfig,
    confusion: dict[tuple[str, str], int] | None = None,
) -> list[CommandAccuracy]:
    counts = {cmd: [0, 0] for cmd in lexicon}  # trials, correct
    for trial in trials:
        result = match_text(trial.transcript_text, lexicon, config)
        counts[trial.expected][0] += 1
        if result.accepted and result.command is trial.expected:
            counts[trial.expected][1] += 1
            outcome = trial.expected.phrase
        elif result.accepted:
            outcome = result.command.phrase
        else:
            outcome = f"rejected/{result.rejection_reason.value}"
        if confusion is not None:
            key = (trial.expected.phrase, outcome)
            confusion[key] = confusion.get(key, 0) + 1
    return [
        CommandAccuracy(command=cmd, trials=counts[cmd][0], correct=counts[cmd][1])
        for cmd in lexicon
    ]


def evaluate_accuracy(
    trials: list[LabeledTrial],
    lexicon: tuple[Command, ...] = COMMANDS,
    config: LexiconConfig = LexiconConfig(),
) -> AccuracyReport:
    if not trials:
        raise ValueError("need at least one trial")
    confusion: dict[tuple[str, str], int] = {}
    rows = _tally(trials, lexicon, config, confusion)
    speakers = sorted({t.speaker_id for t in trials})
    per_speaker = {
        speaker: _tally(
            [t for t in trials if t.speaker_id == speaker], lexicon, config
        )
        for speaker in speakers
    }
    return AccuracyReport(rows=rows, per_speaker=per_speaker, confusion=confusion)


def measure_latency(
    records: list[LatencyRecord], lexicon: tuple[Command, ...] = COMMANDS
) -> LatencyReport:
    if not records:
        raise ValueError("need at least one record")
    rows: list[LatencyStats] = []
    for cmd in lexicon:
        values = np.array([r.latency_s for r in records if r.command is cmd])
        if values.size == 0:
            continue
        rows.append(
            LatencyStats(
                command=cmd,
                count=int(values.size),
                mean_s=float(values.mean()),
                min_s=float(values.min()),
                max_s=float(values.max()),
                p95_s=float(np.percentile(values, 95)),
            )
        )
    pooled = float(np.mean([r.latency_s for r in records]))
    return LatencyReport(rows=rows, pooled_mean_s=pooled)
