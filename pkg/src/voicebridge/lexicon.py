"""Word-level matching of transcripts against the canonical command lexicon.

A transcript is tokenized, scored against every canonical phrase with the
word error rate (WER = (S + D + I) / N from a minimum-cost word-level edit
alignment), and accepted only when the lowest score is strictly below the
configured threshold and the minimizer is unique.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from enum import Enum

__all__ = [
    "Command",
    "COMMANDS",
    "AlignmentStats",
    "LexiconConfig",
    "RejectionReason",
    "MatchResult",
    "EmptyReferenceError",
    "normalize_transcript",
    "word_error_rate",
    "match_command",
    "match_text",
]


class Command(Enum):
    """The seven voice commands, in canonical declaration order."""

    HEY_ROBOT = "hey robot"
    TENSE = "tense"
    RELEASE = "release"
    PULL_MORE = "pull more"
    PULL_LESS = "pull less"
    STOP = "stop"
    TERMINATE = "terminate"

    @property
    def phrase(self) -> str:
        return self.value

    @property
    def phrase_tokens(self) -> list[str]:
        return self.value.split()


COMMANDS: tuple[Command, ...] = tuple(Command)


class RejectionReason(Enum):
    NONE = "none"
    ABOVE_THRESHOLD = "above_threshold"
    AMBIGUOUS_TIE = "ambiguous_tie"
    EMPTY_TRANSCRIPT = "empty_transcript"


class EmptyReferenceError(ValueError):
    """WER is undefined for an empty reference (N = 0)."""


@dataclass(frozen=True)
class AlignmentStats:
    """Edit-operation counts from a minimum-cost word alignment.

    Insertions are hypothesis words with no reference counterpart,
    deletions are reference words missing from the hypothesis.
    """

    substitutions: int
    deletions: int
    insertions: int
    reference_length: int

    def __post_init__(self) -> None:
        if min(self.substitutions, self.deletions, self.insertions) < 0:
            raise ValueError("alignment counts must be nonnegative")
        if self.reference_length < 0:
            raise ValueError("reference_length must be nonnegative")
        if self.substitutions + self.deletions > self.reference_length:
            raise ValueError("S + D cannot exceed the reference length")

    @property
    def edit_distance(self) -> int:
        return self.substitutions + self.deletions + self.insertions


@dataclass(frozen=True)
class LexiconConfig:
    """Acceptance threshold for the matcher; a match needs WER < threshold."""

    threshold: float = 0.6

    def __post_init__(self) -> None:
        if not 0.0 < self.threshold <= 2.0:
            raise ValueError(f"threshold must be in (0, 2], got {self.threshold}")


@dataclass(frozen=True)
class MatchResult:
    command: Command | None
    wer: float
    threshold_used: float
    accepted: bool
    rejection_reason: RejectionReason

    def __post_init__(self) -> None:
        if self.accepted and self.command is None:
            raise ValueError("accepted result must carry a command")
        if self.accepted != (self.rejection_reason is RejectionReason.NONE):
            raise ValueError("rejection_reason must be NONE iff accepted")


# Anything that is not a word character gets dropped; apostrophes survive
# only between alphanumerics ("don't" stays one token).
_NON_WORD = re.compile(r"[^a-z0-9'\s]+")
_LONE_APOSTROPHE = re.compile(r"(?<![a-z0-9])'|'(?![a-z0-9])")


def normalize_transcript(raw: str) -> list[str]:
    """Lowercase, strip punctuation, and split a raw transcript into tokens."""
    text = raw.lower()
    text = _NON_WORD.sub(" ", text)
    text = _LONE_APOSTROPHE.sub(" ", text)
    return text.split()


def word_error_rate(
    hypothesis: list[str], reference: list[str]
) -> tuple[float, AlignmentStats]:
    """WER of ``hypothesis`` against ``reference`` with its alignment counts.

    Dynamic programming over (cost, S, D, I) tuples with unit edit costs;
    ties between operations resolve substitution-first, which keeps the
    counts deterministic. Raises :class:`EmptyReferenceError` when the
    reference is empty.
    """
    n = len(reference)
    m = len(hypothesis)
    if n == 0:
        raise EmptyReferenceError("WER undefined for empty reference")

    # dp[i][j]: (cost, S, D, I) aligning reference[:i] with hypothesis[:j]
    dp = [[(0, 0, 0, 0)] * (m + 1) for _ in range(n + 1)]
    for i in range(1, n + 1):
        dp[i][0] = (i, 0, i, 0)
    for j in range(1, m + 1):
        dp[0][j] = (j, 0, 0, j)

    for i in range(1, n + 1):
        ref_word = reference[i - 1]
        for j in range(1, m + 1):
            if ref_word == hypothesis[j - 1]:
                dp[i][j] = dp[i - 1][j - 1]
                continue
            sub = dp[i - 1][j - 1]
            dele = dp[i - 1][j]
            ins = dp[i][j - 1]
            if sub[0] <= ins[0] and sub[0] <= dele[0]:
                dp[i][j] = (sub[0] + 1, sub[1] + 1, sub[2], sub[3])
            elif ins[0] <= dele[0]:
                dp[i][j] = (ins[0] + 1, ins[1], ins[2], ins[3] + 1)
            else:
                dp[i][j] = (dele[0] + 1, dele[1], dele[2] + 1, dele[3])

    cost, s, d, ins_count = dp[n][m]
    stats = AlignmentStats(
        substitutions=s, deletions=d, insertions=ins_count, reference_length=n
    )
    return cost / n, stats


def match_command(
    transcript: list[str],
    lexicon: tuple[Command, ...] = COMMANDS,
    config: LexiconConfig = LexiconConfig(),
) -> MatchResult:
    """Pick the command with the lowest WER, subject to the threshold.

    Rejects an empty transcript outright, rejects when the minimum WER is
    not strictly below the threshold, and rejects ties at the minimum as
    ambiguous rather than guessing between commands.
    """
    if not lexicon:
        raise ValueError("lexicon must not be empty")

    scores = [
        (word_error_rate(transcript, cmd.phrase_tokens)[0], cmd) for cmd in lexicon
    ]
    best_wer = min(wer for wer, _ in scores)
    minimizers = [cmd for wer, cmd in scores if wer == best_wer]

    if not transcript:
        reason = RejectionReason.EMPTY_TRANSCRIPT
    elif best_wer >= config.threshold:
        reason = RejectionReason.ABOVE_THRESHOLD
    elif len(minimizers) > 1:
        reason = RejectionReason.AMBIGUOUS_TIE
    else:
        return MatchResult(
            command=minimizers[0],
            wer=best_wer,
            threshold_used=config.threshold,
            accepted=True,
            rejection_reason=RejectionReason.NONE,
        )
    return MatchResult(
        command=None,
        wer=best_wer,
        threshold_used=config.threshold,
        accepted=False,
        rejection_reason=reason,
    )


def match_text(
    raw: str,
    lexicon: tuple[Command, ...] = COMMANDS,
    config: LexiconConfig = LexiconConfig(),
) -> MatchResult:
    """Normalize a raw transcript and match it against the lexicon."""
    return match_command(normalize_transcript(raw), lexicon, config)
