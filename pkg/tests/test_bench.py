import numpy as np
import pytest

from voicebridge.bench import (
    LabeledTrial,
    LatencyRecord,
    evaluate_accuracy,
    measure_latency,
    read_latency_csv,
    read_trials_csv,
)
from voicebridge.lexicon import COMMANDS, Command

TABLE_MEANS = {
    Command.HEY_ROBOT: 1.97,
    Command.TENSE: 1.14,
    Command.RELEASE: 1.42,
    Command.PULL_MORE: 2.39,
    Command.PULL_LESS: 2.50,
    Command.STOP: 1.29,
    Command.TERMINATE: 1.52,
}


def exact_trials(n=30, speaker="s1"):
    return [
        LabeledTrial(expected=cmd, transcript_text=cmd.phrase, speaker_id=speaker)
        for cmd in COMMANDS
        for _ in range(n)
    ]


class TestAccuracy:
    def test_exact_phrases_are_perfect(self):
        trials = [
            LabeledTrial(Command.TENSE, "tense", "s1") for _ in range(30)
        ]
        report = evaluate_accuracy(trials)
        row = next(r for r in report.rows if r.command is Command.TENSE)
        assert row.trials == 30 and row.correct == 30
        assert row.accuracy == 1.0

    def test_ambiguous_trial_counts_as_rejected(self):
        trials = [
            LabeledTrial(Command.PULL_MORE, "pull more", "s1") for _ in range(29)
        ] + [LabeledTrial(Command.PULL_MORE, "pull", "s1")]
        report = evaluate_accuracy(trials)
        row = next(r for r in report.rows if r.command is Command.PULL_MORE)
        assert row.trials == 30 and row.correct == 29
        assert report.confusion[("pull more", "rejected/ambiguous_tie")] == 1

    def test_misrecognition_lands_in_confusion(self):
        trials = [LabeledTrial(Command.PULL_MORE, "pull less", "s1")]
        report = evaluate_accuracy(trials)
        assert report.confusion[("pull more", "pull less")] == 1

    def test_per_speaker_rows_sum_to_pooled(self):
        trials = exact_trials(30, "s1") + exact_trials(30, "s2")
        trials[3] = LabeledTrial(Command.HEY_ROBOT, "hey", "s1")  # one miss
        report = evaluate_accuracy(trials)
        for cmd_index, cmd in enumerate(COMMANDS):
            pooled = report.rows[cmd_index]
            split_trials = sum(
                report.per_speaker[s][cmd_index].trials for s in report.per_speaker
            )
            split_correct = sum(
                report.per_speaker[s][cmd_index].correct for s in report.per_speaker
            )
            assert (pooled.trials, pooled.correct) == (split_trials, split_correct)

    def test_pooled_is_trial_weighted(self):
        trials = exact_trials(30) + [LabeledTrial(Command.STOP, "go", "s1")]
        report = evaluate_accuracy(trials)
        total = sum(r.trials for r in report.rows)
        correct = sum(r.correct for r in report.rows)
        assert report.pooled_accuracy == correct / total

    def test_accuracy_bounds(self):
        report = evaluate_accuracy(exact_trials(5))
        for row in report.rows:
            assert 0.0 <= row.accuracy <= 1.0

    def test_csv_has_exactly_seven_rows(self):
        report = evaluate_accuracy(exact_trials(2))
        lines = report.to_csv().strip().split("\n")
        assert len(lines) == 8  # header + 7 commands

    def test_confusion_section_omitted_when_clean(self):
        report = evaluate_accuracy(exact_trials(2))
        assert "Confusions" not in report.to_text()

    def test_determinism(self):
        trials = exact_trials(3) + [LabeledTrial(Command.STOP, "pull", "s2")]
        a = evaluate_accuracy(trials)
        b = evaluate_accuracy(trials)
        assert a.to_csv() == b.to_csv()
        assert a.to_text() == b.to_text()

    def test_empty_trials_rejected(self):
        with pytest.raises(ValueError):
            evaluate_accuracy([])


def records_with_mean(cmd, mean_s, n=30, spread_ms=200):
    """n records whose latencies average exactly mean_s seconds."""
    base_ms = mean_s * 1000.0
    records = []
    for k in range(n // 2):
        delta = spread_ms * (k + 1) / (n // 2)
        records.append(LatencyRecord(cmd, 0.0, base_ms - delta))
        records.append(LatencyRecord(cmd, 0.0, base_ms + delta))
    return records


class TestLatency:
    def test_single_record(self):
        report = measure_latency([LatencyRecord(Command.HEY_ROBOT, 0.0, 1970.0)])
        assert report.rows[0].command is Command.HEY_ROBOT
        assert report.rows[0].mean_s == pytest.approx(1.97)

    def test_reference_table_means_and_pooled(self):
        records = []
        for cmd, mean_s in TABLE_MEANS.items():
            records.extend(records_with_mean(cmd, mean_s))
        report = measure_latency(records)
        assert [r.command for r in report.rows] == list(COMMANDS)
        for row in report.rows:
            assert row.mean_s == pytest.approx(TABLE_MEANS[row.command], abs=5e-4)
        expected_pooled = sum(TABLE_MEANS.values()) / len(TABLE_MEANS)
        assert report.pooled_mean_s == pytest.approx(expected_pooled, abs=1e-6)
        assert abs(report.pooled_mean_s - 1.75) <= 0.01

    def test_zero_latency(self):
        report = measure_latency([LatencyRecord(Command.STOP, 500.0, 500.0)])
        assert report.rows[0].mean_s == 0.0

    def test_permutation_invariance(self):
        records = records_with_mean(Command.TENSE, 1.14) + records_with_mean(
            Command.STOP, 1.29
        )
        forward = measure_latency(records)
        backward = measure_latency(list(reversed(records)))
        assert forward.to_csv() == backward.to_csv()

    def test_stats_fields(self):
        records = [
            LatencyRecord(Command.STOP, 0.0, ms) for ms in (100.0, 200.0, 300.0)
        ]
        row = measure_latency(records).rows[0]
        assert row.min_s == pytest.approx(0.1)
        assert row.max_s == pytest.approx(0.3)
        assert row.count == 3
        assert row.p95_s == pytest.approx(np.percentile([0.1, 0.2, 0.3], 95))

    def test_action_before_utterance_rejected(self):
        with pytest.raises(ValueError):
            LatencyRecord(Command.STOP, 100.0, 50.0)

    def test_text_table_layout(self):
        records = [LatencyRecord(cmd, 0.0, m * 1000) for cmd, m in TABLE_MEANS.items()]
        text = measure_latency(records).to_text()
        lines = [l for l in text.split("\n") if l]
        assert lines[1].split() == ["Voice", "command", "Average", "time"]
        body = lines[2:9]
        assert [" ".join(l.split()[:-1]) for l in body] == [c.phrase for c in COMMANDS]
        assert body[0].split()[-1] == "1.97"
        assert lines[9].split()[0] == "average"


class TestCsvIo:
    def test_trials_roundtrip(self, tmp_path):
        path = tmp_path / "trials.csv"
        path.write_text(
            "speaker_id,expected,transcript,decode_latency_ms\n"
            "s1,tense,tense,900\n"
            "s2,pull more,pull more,\n",
            encoding="utf-8",
        )
        trials = read_trials_csv(path)
        assert trials[0].expected is Command.TENSE
        assert trials[0].decode_latency_ms == 900.0
        assert trials[1].decode_latency_ms is None

    def test_trials_unknown_command(self, tmp_path):
        path = tmp_path / "trials.csv"
        path.write_text(
            "speaker_id,expected,transcript,decode_latency_ms\ns1,dance,dance,\n",
            encoding="utf-8",
        )
        with pytest.raises(ValueError):
            read_trials_csv(path)

    def test_latency_roundtrip(self, tmp_path):
        path = tmp_path / "latency.csv"
        path.write_text(
            "command,t_utterance_end_ms,t_action_start_ms\nstop,100,1390\n",
            encoding="utf-8",
        )
        records = read_latency_csv(path)
        assert records[0].latency_s == pytest.approx(1.29)
