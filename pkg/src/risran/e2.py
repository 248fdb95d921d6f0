"""E2-lite control plane: framed codec, KPM streaming, and the Sched xApp.

Wire format (big-endian throughout):

    frame   := u32 payload_length | u8 msg_type | u32 correlation_id | payload
    SUB_REQ     payload := u32 kpm_period_ms | u8 slice_filter (0xFF = none)
    SUB_RESP    payload := u8 accepted
    INDICATION  payload := u32 record_count | record_count * kpm_record
    kpm_record  := u64 timestamp_ms | u32 ue_id | u8 slice | u64 throughput_bps
                 | u64 buffer_bytes | u8 cqi | u8 mcs | u32 granted | u32 requested
    CONTROL_REQ payload := u8 embb_policy | u8 urllc_policy
    CONTROL_ACK payload := u8 success

Slice codes: 0 = eMBB, 1 = URLLC.  Policy codes: 0 = RR, 1 = WF, 2 = PF.
The same byte layout is documented in docs/protocol.md.
"""

import enum
import itertools
import socket
import struct
from dataclasses import dataclass

from .core import Slice, SchedulingPolicy
from .metrics import KpmRecord

_HEADER = struct.Struct(">IBI")
_KPM_RECORD = struct.Struct(">QIBQQBBII")

_SLICE_CODES = {Slice.EMBB: 0, Slice.URLLC: 1}
_SLICE_BY_CODE = {v: k for k, v in _SLICE_CODES.items()}
_NO_FILTER = 0xFF


class E2ProtocolError(Exception):
    """Base class for malformed E2 frames."""


class TruncatedFrameError(E2ProtocolError):
    """The buffer ends before the frame announced by the length field."""


class FrameLengthError(E2ProtocolError):
    """The length field disagrees with the payload actually present."""


class UnknownMessageTypeError(E2ProtocolError):
    """The msg_type byte does not name a known message."""


class MsgType(enum.IntEnum):
    SUB_REQ = 0x01
    SUB_RESP = 0x02
    INDICATION = 0x03
    CONTROL_REQ = 0x04
    CONTROL_ACK = 0x05


@dataclass(frozen=True)
class Subscription:
    kpm_period_ms: int
    slice_filter: Slice | None = None

    def __post_init__(self):
        if self.kpm_period_ms < 1:
            raise ValueError(f"kpm_period_ms must be >= 1, got {self.kpm_period_ms}")


@dataclass(frozen=True)
class SubscriptionResponse:
    accepted: bool


@dataclass(frozen=True)
class Indication:
    records: tuple

    def __post_init__(self):
        object.__setattr__(self, "records", tuple(self.records))


@dataclass(frozen=True)
class ControlRequest:
    """Per-slice scheduling profile assignment; must cover both slices."""

    policies: dict

    def __post_init__(self):
        if set(self.policies) != set(Slice):
            raise ValueError("ControlRequest must assign a policy to every slice")


@dataclass(frozen=True)
class ControlAck:
    success: bool


@dataclass(frozen=True)
class E2Message:
    msg_type: MsgType
    correlation_id: int
    payload: object

    def __post_init__(self):
        if not 0 <= self.correlation_id <= 0xFFFFFFFF:
            raise ValueError("correlation_id must fit an unsigned 32-bit field")


def _encode_payload(msg_type: MsgType, payload) -> bytes:
    if msg_type is MsgType.SUB_REQ:
        code = _NO_FILTER if payload.slice_filter is None else _SLICE_CODES[payload.slice_filter]
        return struct.pack(">IB", payload.kpm_period_ms, code)
    if msg_type is MsgType.SUB_RESP:
        return struct.pack(">B", int(payload.accepted))
    if msg_type is MsgType.INDICATION:
        parts = [struct.pack(">I", len(payload.records))]
        for r in payload.records:
            parts.append(_KPM_RECORD.pack(r.timestamp_ms, r.ue_id, _SLICE_CODES[r.slice],
                                          r.throughput_bps, r.buffer_bytes, r.cqi, r.mcs,
                                          r.granted_prbs, r.requested_prbs))
        return b"".join(parts)
    if msg_type is MsgType.CONTROL_REQ:
        return struct.pack(">BB", int(payload.policies[Slice.EMBB]),
                           int(payload.policies[Slice.URLLC]))
    if msg_type is MsgType.CONTROL_ACK:
        return struct.pack(">B", int(payload.success))
    raise UnknownMessageTypeError(f"cannot encode msg_type {msg_type!r}")


def _decode_payload(msg_type: MsgType, data: bytes):
    try:
        if msg_type is MsgType.SUB_REQ:
            period, code = struct.unpack(">IB", data)
            sl = None if code == _NO_FILTER else _SLICE_BY_CODE.get(code)
            if code != _NO_FILTER and sl is None:
                raise FrameLengthError(f"unknown slice filter code {code}")
            return Subscription(kpm_period_ms=period, slice_filter=sl)
        if msg_type is MsgType.SUB_RESP:
            return SubscriptionResponse(accepted=bool(struct.unpack(">B", data)[0]))
        if msg_type is MsgType.INDICATION:
            (count,) = struct.unpack(">I", data[:4])
            body = data[4:]
            if len(body) != count * _KPM_RECORD.size:
                raise FrameLengthError(
                    f"indication announces {count} records but carries {len(body)} bytes")
            records = []
            for off in range(0, len(body), _KPM_RECORD.size):
                ts, ue, slc, thr, buf, cqi, mcs, granted, requested = _KPM_RECORD.unpack(
                    body[off:off + _KPM_RECORD.size])
                if slc not in _SLICE_BY_CODE:
                    raise FrameLengthError(f"unknown slice code {slc}")
                records.append(KpmRecord(timestamp_ms=ts, ue_id=ue, slice=_SLICE_BY_CODE[slc],
                                         throughput_bps=thr, buffer_bytes=buf, cqi=cqi, mcs=mcs,
                                         granted_prbs=granted, requested_prbs=requested).validate())
            return Indication(records=tuple(records))
        if msg_type is MsgType.CONTROL_REQ:
            embb, urllc = struct.unpack(">BB", data)
            return ControlRequest(policies={Slice.EMBB: SchedulingPolicy(embb),
                                            Slice.URLLC: SchedulingPolicy(urllc)})
        if msg_type is MsgType.CONTROL_ACK:
            return ControlAck(success=bool(struct.unpack(">B", data)[0]))
    except struct.error as exc:
        raise FrameLengthError(f"payload does not match {msg_type.name} layout: {exc}") from exc
    except ValueError as exc:
        raise FrameLengthError(f"bad field in {msg_type.name} payload: {exc}") from exc
    raise UnknownMessageTypeError(f"cannot decode msg_type {msg_type!r}")


def encode(msg: E2Message) -> bytes:
    payload = _encode_payload(msg.msg_type, msg.payload)
    return _HEADER.pack(len(payload), msg.msg_type, msg.correlation_id) + payload


def decode(data: bytes) -> E2Message:
    """Decode exactly one frame; trailing bytes are a framing error."""
    msg, consumed = decode_prefix(data)
    if consumed != len(data):
        raise FrameLengthError(f"{len(data) - consumed} unexpected trailing bytes")
    return msg


def decode_prefix(data: bytes) -> tuple:
    """Decode the frame at the head of the buffer; returns (message, bytes used)."""
    if len(data) < _HEADER.size:
        raise TruncatedFrameError(f"need {_HEADER.size} header bytes, have {len(data)}")
    length, type_code, correlation_id = _HEADER.unpack(data[:_HEADER.size])
    end = _HEADER.size + length
    if len(data) < end:
        raise TruncatedFrameError(f"frame announces {length} payload bytes, "
                                  f"only {len(data) - _HEADER.size} available")
    try:
        msg_type = MsgType(type_code)
    except ValueError:
        raise UnknownMessageTypeError(f"unknown msg_type 0x{type_code:02x}") from None
    payload = _decode_payload(msg_type, data[_HEADER.size:end])
    return E2Message(msg_type=msg_type, correlation_id=correlation_id, payload=payload), end


class FrameBuffer:
    """Reassembles complete frames from a reliable byte stream."""

    def __init__(self):
        self._buffer = b""

    def feed(self, data: bytes) -> list:
        self._buffer += data
        messages = []
        while True:
            try:
                msg, used = decode_prefix(self._buffer)
            except TruncatedFrameError:
                break
            self._buffer = self._buffer[used:]
            messages.append(msg)
        return messages


class InProcessLink:
    """Ordered, reliable in-process byte pipe between two endpoints."""

    def __init__(self):
        self._queues = {"a": bytearray(), "b": bytearray()}

    def endpoint(self, name: str) -> "LinkEndpoint":
        return LinkEndpoint(self, name)

    def _send(self, sender: str, data: bytes) -> None:
        self._queues["b" if sender == "a" else "a"] += data

    def _receive(self, receiver: str) -> bytes:
        data = bytes(self._queues[receiver])
        self._queues[receiver].clear()
        return data


class LinkEndpoint:
    def __init__(self, link: InProcessLink, name: str):
        self._link = link
        self._name = name
        self._frames = FrameBuffer()

    def send(self, msg: E2Message) -> None:
        self._link._send(self._name, encode(msg))

    def poll(self) -> list:
        return self._frames.feed(self._link._receive(self._name))


# the 9 ordered (eMBB, URLLC) policy pairs, lexicographic with RR < WF < PF
XAPP_POLICY_CYCLE = tuple(itertools.product(SchedulingPolicy, repeat=2))


def xapp_pair_at(second: int) -> tuple:
    return XAPP_POLICY_CYCLE[second % len(XAPP_POLICY_CYCLE)]


class SchedXApp:
    """Cycles the BS scheduling profile pair once per simulated second."""

    def __init__(self):
        self._next_second = 0

    def step(self, elapsed_s: float):
        """ControlRequest at each whole second crossed, otherwise None."""
        if elapsed_s < 0:
            raise ValueError(f"elapsed must be >= 0, got {elapsed_s}")
        if elapsed_s + 1e-9 < self._next_second:
            return None
        second = self._next_second
        self._next_second += 1
        embb, urllc = xapp_pair_at(second)
        return ControlRequest(policies={Slice.EMBB: embb, Slice.URLLC: urllc})


def apply_control(pending_policies: dict, ctrl_policies: dict) -> ControlAck:
    """Stage a policy change for the next TTI boundary.

    Writes into pending_policies and acknowledges; unknown slice ids are
    rejected with a failure ACK and no state change.
    """
    if any(not isinstance(sl, Slice) for sl in ctrl_policies):
        return ControlAck(success=False)
    if any(not isinstance(p, SchedulingPolicy) for p in ctrl_policies.values()):
        return ControlAck(success=False)
    pending_policies.update(ctrl_policies)
    return ControlAck(success=True)


class KpmCollector:
    """Accumulates per-TTI records and cuts one indication per KPM period.

    Records with timestamps in ((N-1) * period, N * period] belong to
    indication N; an empty window still produces a heartbeat indication.
    """

    def __init__(self, subscription: Subscription):
        self.subscription = subscription
        self._window: list[KpmRecord] = []

    def add(self, records) -> None:
        for r in records:
            if (self.subscription.slice_filter is None
                    or r.slice is self.subscription.slice_filter):
                self._window.append(r)

    def maybe_cut(self, now_ms: int):
        """Indication payload when now_ms closes a period, else None."""
        if now_ms % self.subscription.kpm_period_ms != 0 or now_ms == 0:
            return None
        window, self._window = self._window, []
        return Indication(records=tuple(window))


def serve_frames(host: str, port: int, handler, max_messages: int | None = None):
    """Minimal single-connection TCP service speaking the framed codec.

    handler(msg) returns a reply E2Message or None.  Serves until the peer
    closes or max_messages frames have been handled.  Used by the optional
    socket transport; the simulator itself runs the in-process link.
    """
    with socket.socket(socket.AF_INET, socket.SOCK_STREAM) as server:
        server.setsockopt(socket.SOL_SOCKET, socket.SO_REUSEADDR, 1)
        server.bind((host, port))
        server.listen(1)
        conn, _ = server.accept()
        with conn:
            frames = FrameBuffer()
            handled = 0
            while max_messages is None or handled < max_messages:
                data = conn.recv(65536)
                if not data:
                    break
                for msg in frames.feed(data):
                    reply = handler(msg)
                    if reply is not None:
                        conn.sendall(encode(reply))
                    handled += 1
                    if max_messages is not None and handled >= max_messages:
                        break
