"""Metered channels: framed messages over in-process queues or TCP sockets,
per-channel byte/round accounting, and the dollar-cost model.

Every protocol message is a 16-byte header plus payload.  The header carries
a message kind and protocol phase so the leakage sweep can check that
nothing but declared operation types ever crosses a wide-area channel.
"""

from __future__ import annotations

import queue
import socket
import struct
import time
from dataclasses import dataclass, field

# channel classes
WIDE_AREA = "wide-area"
LOCAL = "local-intra-server"
ENCLAVE = "enclave-enclave"

# message kinds
KIND_HELLO = 0
KIND_SHARE_DELIVERY = 1
KIND_MASKED_REVEAL = 2
KIND_CIPHERTEXT = 3
KIND_DEALER = 4
KIND_TEE_MATERIAL = 5
KIND_B3PC = 6

KIND_NAMES = {
    KIND_HELLO: "hello",
    KIND_SHARE_DELIVERY: "share-delivery",
    KIND_MASKED_REVEAL: "masked-reveal",
    KIND_CIPHERTEXT: "ciphertext",
    KIND_DEALER: "dealer-material",
    KIND_TEE_MATERIAL: "tee-material",
    KIND_B3PC: "b3pc",
}

# protocol phases
PHASE_SETUP = 0
PHASE_LOAD = 1
PHASE_PREPROCESS = 2
PHASE_ONLINE = 3

PHASE_NAMES = {0: "setup", 1: "model-loading", 2: "preprocessing", 3: "online"}

# the declared wide-area operation types (criterion: nothing else may cross)
ALLOWED_WIDE_AREA_KINDS = {KIND_HELLO, KIND_SHARE_DELIVERY, KIND_MASKED_REVEAL,
                           KIND_CIPHERTEXT, KIND_DEALER}

HEADER = struct.Struct("<2sBBBBHQ")  # magic, ver, kind, phase, class, rsvd, length
MAGIC = b"PF"
VERSION = 1

_CLASS_CODE = {WIDE_AREA: 0, LOCAL: 1, ENCLAVE: 2}
_CLASS_NAME = {v: k for k, v in _CLASS_CODE.items()}


class TransportError(ConnectionError):
    pass


@dataclass
class Frame:
    kind: int
    phase: int
    payload: bytes

    def encode(self, chan_class: str) -> bytes:
        return HEADER.pack(MAGIC, VERSION, self.kind, self.phase,
                           _CLASS_CODE[chan_class], 0, len(self.payload)) + self.payload


@dataclass
class ChannelMeter:
    chan_class: str
    sent_bytes: int = 0          # on-wire, headers included
    sent_payload: int = 0
    recv_bytes: int = 0
    recv_payload: int = 0
    msgs_sent: int = 0
    msgs_recv: int = 0
    rounds: int = 0              # send -> recv direction flips
    wait_seconds: float = 0.0
    _last_dir: str = field(default="", repr=False)

    def on_send(self, wire: int, payload: int):
        self.sent_bytes += wire
        self.sent_payload += payload
        self.msgs_sent += 1
        self._last_dir = "send"

    def on_recv(self, wire: int, payload: int, waited: float):
        self.recv_bytes += wire
        self.recv_payload += payload
        self.msgs_recv += 1
        self.wait_seconds += waited
        if self._last_dir == "send":
            self.rounds += 1
        self._last_dir = "recv"


@dataclass
class LogEntry:
    direction: str  # "send" | "recv"
    kind: int
    phase: int
    size: int
    payload: bytes | None  # retained only when the channel records transcripts


class Channel:
    """One endpoint of a bidirectional framed link."""

    def __init__(self, name: str, chan_class: str, send_raw, recv_raw,
                 record: bool = False):
        self.name = name
        self.chan_class = chan_class
        self.meter = ChannelMeter(chan_class)
        self.log: list[LogEntry] = []
        self.record = record
        self._send_raw = send_raw
        self._recv_raw = recv_raw

    def send(self, kind: int, phase: int, payload: bytes):
        frame = Frame(kind, phase, payload).encode(self.chan_class)
        self._send_raw(frame)
        self.meter.on_send(len(frame), len(payload))
        self.log.append(LogEntry("send", kind, phase, len(payload),
                                 payload if self.record else None))

    def recv(self) -> Frame:
        t0 = time.perf_counter()
        raw = self._recv_raw()
        waited = time.perf_counter() - t0
        magic, ver, kind, phase, cls, _, length = HEADER.unpack_from(raw, 0)
        if magic != MAGIC or ver != VERSION:
            raise TransportError("bad frame header")
        payload = raw[HEADER.size:]
        if len(payload) != length:
            raise TransportError("frame length mismatch")
        self.meter.on_recv(len(raw), len(payload), waited)
        self.log.append(LogEntry("recv", kind, phase, len(payload),
                                 payload if self.record else None))
        return Frame(kind, phase, payload)

    def exchange(self, kind: int, phase: int, payload: bytes) -> Frame:
        """Symmetric send-then-receive; the protocol's only blocking pattern."""
        self.send(kind, phase, payload)
        return self.recv()


def inproc_pair(name_a: str, name_b: str, chan_class: str,
                record: bool = False) -> tuple[Channel, Channel]:
    qa: queue.Queue = queue.Queue()
    qb: queue.Queue = queue.Queue()
    a = Channel(name_a, chan_class, qa.put, qb.get, record=record)
    b = Channel(name_b, chan_class, qb.put, qa.get, record=record)
    return a, b


class _SocketIo:
    def __init__(self, sock: socket.socket):
        self.sock = sock

    def send(self, data: bytes):
        try:
            self.sock.sendall(data)
        except OSError as e:
            raise TransportError(f"send failed: {e}") from e

    def recv(self) -> bytes:
        head = self._recv_exact(HEADER.size)
        _, _, _, _, _, _, length = HEADER.unpack_from(head, 0)
        return head + self._recv_exact(length)

    def _recv_exact(self, n: int) -> bytes:
        buf = b""
        while len(buf) < n:
            chunk = self.sock.recv(n - len(buf))
            if not chunk:
                raise TransportError("peer disconnected (partial meters preserved)")
            buf += chunk
        return buf


def socket_channel(name: str, chan_class: str, sock: socket.socket,
                   record: bool = False) -> Channel:
    io = _SocketIo(sock)
    return Channel(name, chan_class, io.send, io.recv, record=record)


def listen_one(host: str, port: int, timeout: float = 30.0) -> socket.socket:
    srv = socket.socket(socket.AF_INET, socket.SOCK_STREAM)
    srv.setsockopt(socket.SOL_SOCKET, socket.SO_REUSEADDR, 1)
    srv.bind((host, port))
    srv.listen(1)
    srv.settimeout(timeout)
    conn, _ = srv.accept()
    srv.close()
    return conn


def connect_retry(host: str, port: int, timeout: float = 30.0) -> socket.socket:
    deadline = time.monotonic() + timeout
    while True:
        try:
            return socket.create_connection((host, port), timeout=2.0)
        except OSError:
            if time.monotonic() > deadline:
                raise TransportError(f"cannot connect to {host}:{port}")
            time.sleep(0.05)


# -- meter reporting ---------------------------------------------------------------


def meters_snapshot(channels: list[Channel]) -> dict[str, dict]:
    out: dict[str, dict] = {}
    for ch in channels:
        m = ch.meter
        out[ch.name] = {
            "class": m.chan_class,
            "sent_bytes": m.sent_bytes,
            "sent_payload": m.sent_payload,
            "recv_bytes": m.recv_bytes,
            "recv_payload": m.recv_payload,
            "msgs_sent": m.msgs_sent,
            "msgs_recv": m.msgs_recv,
            "rounds": m.rounds,
        }
    return out


def render_meters(snap: dict[str, dict]) -> str:
    lines = []
    for name in sorted(snap):
        m = snap[name]
        lines.append(
            f"meter channel={name} class={m['class']} "
            f"sent_bytes={m['sent_bytes']} sent_payload={m['sent_payload']} "
            f"recv_bytes={m['recv_bytes']} recv_payload={m['recv_payload']} "
            f"msgs_sent={m['msgs_sent']} msgs_recv={m['msgs_recv']} "
            f"rounds={m['rounds']}")
    return "\n".join(lines)


def sweep_wide_area(channels: list[Channel]) -> list[str]:
    """Leakage-structure check: undeclared kinds or phase violations."""
    bad = []
    for ch in channels:
        if ch.chan_class != WIDE_AREA:
            continue
        for e in ch.log:
            if e.kind not in ALLOWED_WIDE_AREA_KINDS:
                bad.append(f"{ch.name}: kind {e.kind} not declared for wide-area")
            if e.kind == KIND_DEALER and e.phase in (PHASE_PREPROCESS, PHASE_ONLINE):
                bad.append(f"{ch.name}: dealer material in {PHASE_NAMES[e.phase]}")
            if e.kind == KIND_HELLO and e.phase != PHASE_SETUP:
                bad.append(f"{ch.name}: hello outside setup")
    return bad


# -- dollar-cost model ----------------------------------------------------------------

# per-hour CPU prices by machine class and $/GB for outbound wide-area traffic
DEFAULT_CPU_PRICES = {
    "general-aws": 0.015,
    "general-azure": 0.017,
    "amd": 0.022,
    "sgx": 0.079,
}
WAN_PRICE_PER_GB = 0.05          # headline price
WAN_PRICE_PER_GB_APPENDIX = 0.5  # alternative figure; selectable, not default


@dataclass(frozen=True)
class CostModel:
    wan_per_gb: float = WAN_PRICE_PER_GB
    cpu_per_hr: tuple[tuple[str, float], ...] = tuple(DEFAULT_CPU_PRICES.items())

    def cpu_price(self, machine: str) -> float:
        for name, price in self.cpu_per_hr:
            if name == machine:
                return price
        raise KeyError(f"no price for machine class {machine}")


@dataclass
class CostReport:
    wan_bytes_out: int
    local_bytes: int
    cpu_hours: dict[str, float]
    model: CostModel

    @property
    def wan_dollars(self) -> float:
        return self.wan_bytes_out / 1e9 * self.model.wan_per_gb

    @property
    def cpu_dollars(self) -> float:
        return sum(h * self.model.cpu_price(m) for m, h in self.cpu_hours.items())

    @property
    def total_dollars(self) -> float:
        return self.wan_dollars + self.cpu_dollars

    def render(self) -> str:
        lines = [
            f"cost wan_bytes_out={self.wan_bytes_out} "
            f"wan_dollars={self.wan_dollars:.6f}",
            f"cost local_bytes={self.local_bytes} local_dollars=0.000000",
        ]
        for m, h in sorted(self.cpu_hours.items()):
            lines.append(f"cost cpu machine={m} hours={h:.6f} "
                         f"dollars={h * self.model.cpu_price(m):.6f}")
        lines.append(f"cost total_dollars={self.total_dollars:.6f}")
        return "\n".join(lines)


def cost_report(snap: dict[str, dict], cpu_hours: dict[str, float] | None = None,
                model: CostModel | None = None) -> CostReport:
    model = model or CostModel()
    wan = sum(m["sent_bytes"] for m in snap.values() if m["class"] == WIDE_AREA)
    local = sum(m["sent_bytes"] for m in snap.values() if m["class"] != WIDE_AREA)
    return CostReport(wan_bytes_out=wan, local_bytes=local,
                      cpu_hours=cpu_hours or {}, model=model)
