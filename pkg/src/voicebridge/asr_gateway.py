"""Audio capture/replay, utterance endpointing, and pluggable ASR backends.

The speech recognizer itself stays outside this artifact. Three backend
kinds cover the pipeline shape: ``replay`` reads timestamped transcript
lines from a file (used by all deterministic tests), ``subprocess`` pipes a
WAV to a child process and reads one line of text back, and ``http`` POSTs
the WAV to a configured URL and takes the plain-text body verbatim.
"""

from __future__ import annotations

import io
import logging
import subprocess
import time
import wave
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Iterable, Iterator

import numpy as np
import requests
from scipy.signal import lfilter

log = logging.getLogger(__name__)

__all__ = [
    "SAMPLE_RATE",
    "AudioSegment",
    "Transcript",
    "EndpointConfig",
    "BackendUnavailableError",
    "BackendTimeoutError",
    "ReplayFormatError",
    "preprocess",
    "highpass_filter",
    "highpass_gain",
    "UtteranceDetector",
    "detect_utterance",
    "segment_to_wav",
    "SubprocessBackend",
    "HttpBackend",
    "ReplaySource",
    "transcribe",
    "AudioPipeline",
]

SAMPLE_RATE = 16_000  # Hz, fixed pipeline rate
MAX_SEGMENT_MS = 30_000  # backend chunk bound
WINDOW_MS = 20  # endpointing RMS window
HIGHPASS_CUTOFF_HZ = 80.0
PEAK_TARGET_DBFS = -3.0
FULL_SCALE = 32768.0


class BackendUnavailableError(RuntimeError):
    """The ASR backend could not be reached or spawned."""


class BackendTimeoutError(RuntimeError):
    """The ASR backend missed its decode deadline."""


class ReplayFormatError(ValueError):
    def __init__(self, path: str, line_number: int, detail: str):
        super().__init__(f"{path}:{line_number}: {detail}")
        self.path = path
        self.line_number = line_number


@dataclass(frozen=True)
class AudioSegment:
    """PCM16 mono audio between two monotonic millisecond timestamps."""

    samples: np.ndarray
    sample_rate: int
    t_start_ms: float
    t_end_ms: float

    def __post_init__(self) -> None:
        samples = np.asarray(self.samples, dtype=np.int16)
        object.__setattr__(self, "samples", samples)
        if self.t_end_ms <= self.t_start_ms:
            raise ValueError("t_end_ms must be greater than t_start_ms")
        if self.t_end_ms - self.t_start_ms > MAX_SEGMENT_MS:
            raise ValueError("segment exceeds the 30 s backend chunk bound")

    @property
    def duration_ms(self) -> float:
        return self.t_end_ms - self.t_start_ms


@dataclass(frozen=True)
class Transcript:
    text: str
    t_utterance_end: float  # ms
    t_transcript_ready: float  # ms
    backend_id: str

    def __post_init__(self) -> None:
        if self.t_transcript_ready < self.t_utterance_end:
            raise ValueError("transcript cannot be ready before the utterance ends")

    @property
    def decode_latency_ms(self) -> float:
        return self.t_transcript_ready - self.t_utterance_end


@dataclass(frozen=True)
class EndpointConfig:
    energy_threshold: float = 0.02  # RMS, normalized 0..1
    min_silence_ms: int = 700
    max_utterance_ms: int = 10_000

    def __post_init__(self) -> None:
        if self.min_silence_ms <= 0:
            raise ValueError("min_silence_ms must be > 0")
        if not 0 < self.max_utterance_ms <= MAX_SEGMENT_MS:
            raise ValueError("max_utterance_ms must be in (0, 30000]")


# -- preprocessing -----------------------------------------------------------


def _alpha(cutoff_hz: float, sample_rate: int) -> float:
    rc = 1.0 / (2.0 * np.pi * cutoff_hz)
    dt = 1.0 / sample_rate
    return rc / (rc + dt)


def highpass_filter(
    samples: np.ndarray, sample_rate: int, cutoff_hz: float = HIGHPASS_CUTOFF_HZ
) -> np.ndarray:
    """First-order high-pass on normalized float samples.

    y[n] = a * (y[n-1] + x[n] - x[n-1]), starting from silence.
    """
    a = _alpha(cutoff_hz, sample_rate)
    x = np.asarray(samples, dtype=float)
    # H(z) = a (1 - z^-1) / (1 - a z^-1), zero initial state.
    return lfilter([a, -a], [1.0, -a], x)


def highpass_gain(freq_hz: float, sample_rate: int = SAMPLE_RATE,
                  cutoff_hz: float = HIGHPASS_CUTOFF_HZ) -> float:
    """Analytic magnitude response of the high-pass at ``freq_hz``."""
    a = _alpha(cutoff_hz, sample_rate)
    w = 2.0 * np.pi * freq_hz / sample_rate
    num = a * abs(1.0 - np.exp(-1j * w))
    den = abs(1.0 - a * np.exp(-1j * w))
    return float(num / den)


def preprocess(segment: AudioSegment) -> AudioSegment:
    """High-pass at 80 Hz then peak-normalize to -3 dBFS.

    Silence stays silence; duration, rate, and timestamps are unchanged.
    """
    x = segment.samples.astype(float) / FULL_SCALE
    y = highpass_filter(x, segment.sample_rate)
    peak = float(np.max(np.abs(y)))
    if peak > 0.0:
        y = y * (10.0 ** (PEAK_TARGET_DBFS / 20.0) / peak)
    out = np.clip(np.rint(y * FULL_SCALE), -32768, 32767).astype(np.int16)
    return AudioSegment(
        samples=out,
        sample_rate=segment.sample_rate,
        t_start_ms=segment.t_start_ms,
        t_end_ms=segment.t_end_ms,
    )


# -- endpointing -------------------------------------------------------------


class UtteranceDetector:
    """Energy-based segmenter over 20 ms windows of a 16 kHz stream.

    A segment opens on the first window whose RMS exceeds the threshold and
    closes once min_silence_ms of consecutive quiet windows accumulate (the
    quiet tail stays inside the segment) or at the max utterance length.
    Every input sample lands either in an emitted segment or in the
    discarded-silence counter, so nothing is lost between segments.
    """

    def __init__(self, config: EndpointConfig, sample_rate: int = SAMPLE_RATE):
        self.config = config
        self.sample_rate = sample_rate
        self.window = sample_rate * WINDOW_MS // 1000
        self._pending = np.empty(0, dtype=np.int16)
        self._stream_index = 0  # absolute sample count consumed into windows
        self._open: list[np.ndarray] = []
        self._open_start_idx = 0
        self._silence_ms = 0.0
        self.samples_emitted = 0
        self.samples_discarded = 0

    def _ms(self, sample_index: int) -> float:
        return 1000.0 * sample_index / self.sample_rate

    def _close_segment(self, end_idx: int) -> AudioSegment:
        samples = np.concatenate(self._open) if self._open else np.empty(0, np.int16)
        seg = AudioSegment(
            samples=samples,
            sample_rate=self.sample_rate,
            t_start_ms=self._ms(self._open_start_idx),
            t_end_ms=self._ms(end_idx),
        )
        self.samples_emitted += len(samples)
        self._open = []
        self._silence_ms = 0.0
        return seg

    def push(self, chunk: np.ndarray) -> list[AudioSegment]:
        """Consume a chunk of samples; return any segments that closed."""
        self._pending = np.concatenate(
            [self._pending, np.asarray(chunk, dtype=np.int16)]
        )
        out: list[AudioSegment] = []
        while len(self._pending) >= self.window:
            window, self._pending = (
                self._pending[: self.window],
                self._pending[self.window :],
            )
            out.extend(self._consume_window(window))
        return out

    def _consume_window(self, window: np.ndarray) -> list[AudioSegment]:
        start_idx = self._stream_index
        self._stream_index += len(window)
        rms = float(np.sqrt(np.mean((window.astype(float) / FULL_SCALE) ** 2)))
        voiced = rms > self.config.energy_threshold
        out: list[AudioSegment] = []

        if not self._open:
            if voiced:
                self._open = [window]
                self._open_start_idx = start_idx
                self._silence_ms = 0.0
            else:
                self.samples_discarded += len(window)
            return out

        self._open.append(window)
        self._silence_ms = 0.0 if voiced else self._silence_ms + WINDOW_MS
        open_ms = self._ms(self._stream_index) - self._ms(self._open_start_idx)
        if self._silence_ms >= self.config.min_silence_ms:
            out.append(self._close_segment(self._stream_index))
        elif open_ms >= self.config.max_utterance_ms:
            out.append(self._close_segment(self._stream_index))
        return out

    def finish(self) -> AudioSegment | None:
        """Flush at end of stream; closes any open segment."""
        if self._pending.size:
            # The final partial window joins an open segment or is silence.
            if self._open:
                self._open.append(self._pending)
                self._stream_index += len(self._pending)
            else:
                self.samples_discarded += len(self._pending)
                self._stream_index += len(self._pending)
            self._pending = np.empty(0, dtype=np.int16)
        if self._open:
            return self._close_segment(self._stream_index)
        return None


def detect_utterance(
    stream: Iterable[np.ndarray], config: EndpointConfig
) -> Iterator[AudioSegment]:
    """Segment an iterable of sample chunks into utterances."""
    detector = UtteranceDetector(config)
    for chunk in stream:
        yield from detector.push(chunk)
    tail = detector.finish()
    if tail is not None:
        yield tail


# -- backends ----------------------------------------------------------------


def segment_to_wav(segment: AudioSegment) -> bytes:
    """RIFF WAV bytes: PCM16, mono, at the segment's sample rate."""
    buf = io.BytesIO()
    with wave.open(buf, "wb") as wav:
        wav.setnchannels(1)
        wav.setsampwidth(2)
        wav.setframerate(segment.sample_rate)
        wav.writeframes(segment.samples.astype("<i2").tobytes())
    return buf.getvalue()


class SubprocessBackend:
    """Spawns a child process per request: WAV on stdin, one text line out."""

    def __init__(self, command: list[str], deadline_s: float = 10.0):
        self.command = list(command)
        self.deadline_s = deadline_s
        self.backend_id = "subprocess"

    def transcribe_wav(self, wav_bytes: bytes) -> str:
        try:
            proc = subprocess.run(
                self.command,
                input=wav_bytes,
                stdout=subprocess.PIPE,
                stderr=subprocess.DEVNULL,
                timeout=self.deadline_s,
            )
        except subprocess.TimeoutExpired as exc:
            raise BackendTimeoutError(
                f"backend {self.command[0]} exceeded {self.deadline_s}s"
            ) from exc
        except OSError as exc:
            raise BackendUnavailableError(
                f"cannot spawn backend {self.command[0]}: {exc}"
            ) from exc
        if proc.returncode != 0:
            raise BackendUnavailableError(
                f"backend {self.command[0]} exited with {proc.returncode}"
            )
        return proc.stdout.decode("utf-8", errors="replace").splitlines()[0].strip() if proc.stdout else ""


class HttpBackend:
    """POSTs WAV bytes to a URL; the plain-text response body is the text."""

    def __init__(self, url: str, deadline_s: float = 10.0):
        self.url = url
        self.deadline_s = deadline_s
        self.backend_id = "http"

    def transcribe_wav(self, wav_bytes: bytes) -> str:
        try:
            resp = requests.post(
                self.url,
                data=wav_bytes,
                headers={"Content-Type": "audio/wav"},
                timeout=self.deadline_s,
            )
        except requests.Timeout as exc:
            raise BackendTimeoutError(f"{self.url} exceeded {self.deadline_s}s") from exc
        except requests.RequestException as exc:
            raise BackendUnavailableError(f"{self.url}: {exc}") from exc
        if resp.status_code != 200:
            raise BackendUnavailableError(f"{self.url}: HTTP {resp.status_code}")
        return resp.text.strip()

    def check_reachable(self) -> None:
        """Startup probe; raises BackendUnavailableError when unreachable."""
        try:
            requests.head(self.url, timeout=min(self.deadline_s, 3.0))
        except requests.RequestException as exc:
            raise BackendUnavailableError(f"{self.url}: {exc}") from exc


def transcribe(
    segment: AudioSegment,
    backend: SubprocessBackend | HttpBackend,
    clock_ms: Callable[[], float] = lambda: time.monotonic() * 1000.0,
) -> Transcript:
    """Run one segment through an audio backend, stamping decode latency."""
    text = backend.transcribe_wav(segment_to_wav(segment))
    return Transcript(
        text=text,
        t_utterance_end=segment.t_end_ms,
        t_transcript_ready=max(clock_ms(), segment.t_end_ms),
        backend_id=backend.backend_id,
    )


# -- transcript sources ------------------------------------------------------


class ReplaySource:
    """Deterministic transcript source: ``<timestamp_ms>\\t<text>`` lines."""

    backend_id = "replay"

    def __init__(self, path: str | Path):
        self.path = Path(path)
        self.entries = self._parse()

    def _parse(self) -> list[tuple[float, str]]:
        entries: list[tuple[float, str]] = []
        last_t = float("-inf")
        with open(self.path, "r", encoding="utf-8") as fh:
            for number, raw in enumerate(fh, start=1):
                line = raw.rstrip("\n")
                if not line.strip():
                    continue
                parts = line.split("\t", 1)
                if len(parts) != 2:
                    raise ReplayFormatError(
                        str(self.path), number, "expected '<timestamp_ms>\\t<text>'"
                    )
                try:
                    stamp = float(parts[0])
                except ValueError:
                    raise ReplayFormatError(
                        str(self.path), number, f"bad timestamp {parts[0]!r}"
                    ) from None
                if stamp < last_t:
                    raise ReplayFormatError(
                        str(self.path), number, "timestamps must be nondecreasing"
                    )
                last_t = stamp
                entries.append((stamp, parts[1]))
        return entries

    def transcripts(self) -> Iterator[Transcript]:
        for stamp, text in self.entries:
            yield Transcript(
                text=text,
                t_utterance_end=stamp,
                t_transcript_ready=stamp,
                backend_id=self.backend_id,
            )


class AudioPipeline:
    """WAV file/stream -> endpointing -> preprocess -> backend -> transcripts.

    Backend failures are non-fatal: the segment is dropped (no command can
    be dispatched from it), the failure is counted and logged, and the
    pipeline keeps listening.
    """

    def __init__(
        self,
        backend: SubprocessBackend | HttpBackend,
        endpoint: EndpointConfig,
        clock_ms: Callable[[], float] = lambda: time.monotonic() * 1000.0,
    ):
        self.backend = backend
        self.endpoint = endpoint
        self.clock_ms = clock_ms
        self.backend_failures = 0

    def run(self, stream: Iterable[np.ndarray]) -> Iterator[Transcript]:
        for segment in detect_utterance(stream, self.endpoint):
            try:
                yield transcribe(preprocess(segment), self.backend, self.clock_ms)
            except (BackendUnavailableError, BackendTimeoutError) as exc:
                self.backend_failures += 1
                log.warning("dropping segment, backend failed: %s", exc)


def read_wav_chunks(path: str | Path, chunk_ms: int = 100) -> Iterator[np.ndarray]:
    """Stream a 16 kHz mono PCM16 WAV file as fixed-size sample chunks."""
    with wave.open(str(path), "rb") as wav:
        if wav.getnchannels() != 1 or wav.getsampwidth() != 2:
            raise ValueError(f"{path}: expected mono PCM16 WAV")
        if wav.getframerate() != SAMPLE_RATE:
            raise ValueError(f"{path}: expected {SAMPLE_RATE} Hz sample rate")
        frames_per_chunk = SAMPLE_RATE * chunk_ms // 1000
        while True:
            raw = wav.readframes(frames_per_chunk)
            if not raw:
                return
            yield np.frombuffer(raw, dtype="<i2")
