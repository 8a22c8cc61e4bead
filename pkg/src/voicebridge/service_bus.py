"""Request/response and telemetry bus: newline-delimited JSON over TCP and
the same payloads over WebSocket.

Every frame is one JSON object with a ``type`` field drawn from the six
message kinds. Unknown types are logged and ignored. Responses to a
connection's requests are never dropped and arrive in request order;
telemetry broadcasts ride a bounded per-connection buffer (depth 32) that
drops the oldest updates for slow consumers so the robot loop never blocks.
"""

from __future__ import annotations

import json
import logging
import socket
import socketserver
import threading
from collections import deque
from dataclasses import asdict, dataclass
from typing import Callable, Protocol

from websockets.sync.server import serve as ws_serve

__all__ = [
    "ActionRequest",
    "ActionResponse",
    "StateUpdate",
    "TranscriptFrame",
    "InjectCommand",
    "MatchResultFrame",
    "Frame",
    "ProtocolError",
    "encode_frame",
    "decode_frame",
    "ServiceBus",
    "BusHandler",
    "DEFAULT_TCP_PORT",
    "DEFAULT_WS_PORT",
    "TELEMETRY_BUFFER_DEPTH",
    "REQUEST_TIMEOUT_S",
]

log = logging.getLogger(__name__)

DEFAULT_TCP_PORT = 7420
DEFAULT_WS_PORT = 7421
TELEMETRY_BUFFER_DEPTH = 32
REQUEST_TIMEOUT_S = 2.0


class ProtocolError(ValueError):
    """A frame was structurally invalid for its declared type."""


@dataclass(frozen=True)
class ActionRequest:
    id: int
    command: str
    stamp_ms: float

    def __post_init__(self) -> None:
        if not self.command:
            raise ProtocolError("action_request needs a non-empty command")


@dataclass(frozen=True)
class ActionResponse:
    id: int
    accepted: bool
    reason: str = ""

    def __post_init__(self) -> None:
        if self.accepted != (self.reason == ""):
            raise ProtocolError("reason must be empty exactly when accepted")


@dataclass(frozen=True)
class StateUpdate:
    stamp_ms: float
    session_mode: str
    joint_positions: tuple[float, ...]
    tool_tip_position: tuple[float, float, float]
    rcm_error: float
    gripper_aperture: float
    pull_displacement: float
    tension: float

    def __post_init__(self) -> None:
        object.__setattr__(self, "joint_positions", tuple(self.joint_positions))
        object.__setattr__(self, "tool_tip_position", tuple(self.tool_tip_position))


@dataclass(frozen=True)
class TranscriptFrame:
    text: str
    t_utterance_end: float
    t_transcript_ready: float
    backend_id: str


@dataclass(frozen=True)
class InjectCommand:
    text: str


@dataclass(frozen=True)
class MatchResultFrame:
    stamp_ms: float
    text: str
    command: str | None
    wer: float
    threshold: float
    accepted: bool
    reason: str


Frame = (
    ActionRequest
    | ActionResponse
    | StateUpdate
    | TranscriptFrame
    | InjectCommand
    | MatchResultFrame
)

_TYPE_TO_CLASS = {
    "action_request": ActionRequest,
    "action_response": ActionResponse,
    "state_update": StateUpdate,
    "transcript": TranscriptFrame,
    "inject_command": InjectCommand,
    "match_result": MatchResultFrame,
}
_CLASS_TO_TYPE = {cls: name for name, cls in _TYPE_TO_CLASS.items()}


def encode_frame(frame: Frame) -> str:
    """One JSON object per frame, ``type`` first; no trailing newline."""
    payload = {"type": _CLASS_TO_TYPE[type(frame)], **asdict(frame)}
    return json.dumps(payload, separators=(",", ":"))


def decode_frame(line: str) -> Frame | None:
    """Parse one frame; unknown types return None (logged, ignored)."""
    try:
        payload = json.loads(line)
    except json.JSONDecodeError as exc:
        raise ProtocolError(f"invalid JSON frame: {exc}") from exc
    if not isinstance(payload, dict):
        raise ProtocolError("frame must be a JSON object")
    kind = payload.pop("type", None)
    cls = _TYPE_TO_CLASS.get(kind)
    if cls is None:
        log.warning("ignoring frame with unknown type %r", kind)
        return None
    try:
        return cls(**payload)
    except TypeError as exc:
        raise ProtocolError(f"bad fields for {kind}: {exc}") from exc


class BusHandler(Protocol):
    """The stack-side entry points the bus routes inbound frames into."""

    def handle_inject(self, text: str, timeout_s: float) -> MatchResultFrame | None:
        ...

    def handle_action_request(
        self, request: ActionRequest, timeout_s: float
    ) -> ActionResponse:
        ...


class _Subscriber:
    """Per-connection outbound lanes: ordered responses, lossy telemetry."""

    def __init__(self, send_text: Callable[[str], None]):
        self._send_text = send_text
        self._responses: deque[str] = deque()
        self._telemetry: deque[str] = deque(maxlen=TELEMETRY_BUFFER_DEPTH)
        self._cond = threading.Condition()
        self.closed = False

    def queue_response(self, frame: Frame) -> None:
        with self._cond:
            self._responses.append(encode_frame(frame))
            self._cond.notify()

    def queue_telemetry(self, line: str) -> None:
        with self._cond:
            self._telemetry.append(line)  # maxlen drops the oldest
            self._cond.notify()

    def close(self) -> None:
        with self._cond:
            self.closed = True
            self._cond.notify()

    def sender_loop(self) -> None:
        while True:
            with self._cond:
                while not (self._responses or self._telemetry or self.closed):
                    self._cond.wait()
                if self.closed:
                    return
                line = (
                    self._responses.popleft()
                    if self._responses
                    else self._telemetry.popleft()
                )
            try:
                self._send_text(line)
            except Exception:
                self.close()
                return


class ServiceBus:
    """TCP (NDJSON) and WebSocket endpoints sharing one broadcast hub."""

    def __init__(
        self,
        handler: BusHandler,
        tcp_port: int = DEFAULT_TCP_PORT,
        ws_port: int = DEFAULT_WS_PORT,
        host: str = "127.0.0.1",
        request_timeout_s: float = REQUEST_TIMEOUT_S,
    ):
        self.handler = handler
        self.host = host
        self.request_timeout_s = request_timeout_s
        self._subscribers: set[_Subscriber] = set()
        self._subs_lock = threading.Lock()
        self._threads: list[threading.Thread] = []

        bus = self

        class _TcpHandler(socketserver.StreamRequestHandler):
            def handle(self) -> None:
                self.connection.setsockopt(
                    socket.IPPROTO_TCP, socket.TCP_NODELAY, 1
                )
                write_lock = threading.Lock()

                def send_text(line: str) -> None:
                    with write_lock:
                        self.wfile.write(line.encode("utf-8") + b"\n")
                        self.wfile.flush()

                sub = bus._register(send_text)
                try:
                    for raw in self.rfile:
                        line = raw.decode("utf-8", errors="replace").strip()
                        if not line:
                            continue
                        bus._route(line, sub)
                finally:
                    bus._unregister(sub)

        class _TcpServer(socketserver.ThreadingTCPServer):
            daemon_threads = True
            allow_reuse_address = True

        self._tcp = _TcpServer((host, tcp_port), _TcpHandler)
        self.tcp_port = self._tcp.server_address[1]

        def ws_conn(conn) -> None:
            sub = bus._register(conn.send)
            try:
                for message in conn:
                    if isinstance(message, bytes):
                        message = message.decode("utf-8", errors="replace")
                    bus._route(message, sub)
            except Exception:
                pass
            finally:
                bus._unregister(sub)

        self._ws = ws_serve(ws_conn, host, ws_port)
        self.ws_port = self._ws.socket.getsockname()[1]

    # -- lifecycle ----------------------------------------------------------

    def start(self) -> None:
        for name, target in (
            ("bus-tcp", self._tcp.serve_forever),
            ("bus-ws", self._ws.serve_forever),
        ):
            thread = threading.Thread(target=target, name=name, daemon=True)
            thread.start()
            self._threads.append(thread)

    def stop(self) -> None:
        self._tcp.shutdown()
        self._tcp.server_close()
        self._ws.shutdown()
        with self._subs_lock:
            subs = list(self._subscribers)
        for sub in subs:
            sub.close()

    # -- hub ----------------------------------------------------------------

    def _register(self, send_text: Callable[[str], None]) -> _Subscriber:
        sub = _Subscriber(send_text)
        thread = threading.Thread(target=sub.sender_loop, daemon=True)
        thread.start()
        with self._subs_lock:
            self._subscribers.add(sub)
        return sub

    def _unregister(self, sub: _Subscriber) -> None:
        sub.close()
        with self._subs_lock:
            self._subscribers.discard(sub)

    @property
    def subscriber_count(self) -> int:
        with self._subs_lock:
            return len(self._subscribers)

    def publish(self, frame: Frame) -> None:
        """Broadcast a frame to every connection; never blocks the caller."""
        line = encode_frame(frame)
        with self._subs_lock:
            subs = list(self._subscribers)
        for sub in subs:
            sub.queue_telemetry(line)

    # -- routing ------------------------------------------------------------

    def _route(self, line: str, sub: _Subscriber) -> None:
        try:
            frame = decode_frame(line)
        except ProtocolError as exc:
            log.warning("dropping malformed frame: %s", exc)
            return
        if frame is None:
            return
        if isinstance(frame, InjectCommand):
            # The resulting match_result (and any action frames) reach the
            # injector through the broadcast hub like any other observer.
            self.handler.handle_inject(frame.text, self.request_timeout_s)
        elif isinstance(frame, ActionRequest):
            response = self.handler.handle_action_request(
                frame, self.request_timeout_s
            )
            sub.queue_response(response)
        else:
            log.warning(
                "ignoring inbound %s frame (server-published type)",
                _CLASS_TO_TYPE[type(frame)],
            )
