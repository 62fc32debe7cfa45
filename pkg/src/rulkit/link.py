"""Framed host<->device wire protocol plus a software device simulator.

Frames are flag-delimited (0x7E) with HDLC-style byte stuffing
(0x7E -> 0x7D 0x5E, 0x7D -> 0x7D 0x5D). Frame content, CRC'd before
stuffing with CRC-16/CCITT-FALSE (poly 0x1021, init 0xFFFF, unreflected,
no final xor):

    version(1)=0x01 | msg_type(1) | seq(1, wraps) | payload_len(2, BE)
    | payload | crc(2, BE)

The simulator mirrors a relay-actuation microcontroller: it answers pings,
applies relay commands (ACK + RELAY_STATE), acknowledges predictions
without acting on them (inference stays host-side), NACKs unknown message
types, and emits heartbeats on its interval when polled.
"""

from __future__ import annotations

import os
import struct
from dataclasses import dataclass, field
from enum import IntEnum

FLAG = 0x7E
ESCAPE = 0x7D
ESCAPE_XOR = 0x20
PROTOCOL_VERSION = 0x01
MAX_PAYLOAD = 256
HEADER_LEN = 5  # version, msg_type, seq, payload_len (2)

NACK_UNKNOWN_TYPE = 0x01


class MsgType(IntEnum):
    PING = 0x01
    PONG = 0x02
    SET_RELAY = 0x03
    RELAY_STATE = 0x04
    PREDICTION = 0x05
    TELEMETRY = 0x06
    ACK = 0x07
    NACK = 0x08
    HEARTBEAT = 0x09


PAYLOAD_SIZES = {
    MsgType.PING: 0,
    MsgType.PONG: 0,
    MsgType.SET_RELAY: 1,
    MsgType.RELAY_STATE: 1,
    MsgType.PREDICTION: 3,
    MsgType.TELEMETRY: 5,
    MsgType.ACK: 1,
    MsgType.NACK: 2,
    MsgType.HEARTBEAT: 0,
}


def _build_crc_table():
    table = []
    for byte in range(256):
        crc = byte << 8
        for _ in range(8):
            crc = ((crc << 1) ^ 0x1021 if crc & 0x8000 else crc << 1) & 0xFFFF
        table.append(crc)
    return tuple(table)


_CRC_TABLE = _build_crc_table()


def crc16(data: bytes, crc: int = 0xFFFF) -> int:
    """CRC-16/CCITT-FALSE (check value of b"123456789" is 0x29B1)."""
    for byte in data:
        crc = ((crc << 8) & 0xFFFF) ^ _CRC_TABLE[((crc >> 8) ^ byte) & 0xFF]
    return crc


@dataclass(frozen=True)
class Frame:
    msg_type: int
    seq: int
    payload: bytes = b""
    version: int = PROTOCOL_VERSION


@dataclass(frozen=True)
class FrameDecoded:
    frame: Frame


@dataclass(frozen=True)
class FrameError:
    reason: str  # bad_crc | bad_length | unknown_type | desync
    seq: int | None = None
    msg_type: int | None = None


def encode_frame(frame: Frame) -> bytes:
    """Flag byte, then the byte-stuffed CRC-protected frame content."""
    if len(frame.payload) > MAX_PAYLOAD:
        raise ValueError(f"payload of {len(frame.payload)} bytes exceeds {MAX_PAYLOAD}")
    content = bytearray([frame.version & 0xFF, frame.msg_type & 0xFF,
                         frame.seq & 0xFF])
    content += len(frame.payload).to_bytes(2, "big")
    content += frame.payload
    content += crc16(bytes(content)).to_bytes(2, "big")
    out = bytearray([FLAG])
    for byte in content:
        if byte in (FLAG, ESCAPE):
            out.append(ESCAPE)
            out.append(byte ^ ESCAPE_XOR)
        else:
            out.append(byte)
    return bytes(out)


class Decoder:
    """Incremental frame decoder; chunking never changes the event stream."""

    def __init__(self):
        self._in_frame = False
        self._escape = False
        self._buf = bytearray()

    def feed(self, data: bytes) -> list:
        events = []
        for byte in data:
            event = self._feed_byte(byte)
            if event is not None:
                events.append(event)
        return events

    def _reset(self, in_frame=False):
        self._in_frame = in_frame
        self._escape = False
        self._buf = bytearray()

    def _feed_byte(self, byte):
        if byte == FLAG:
            incomplete = self._in_frame and (len(self._buf) > 0 or self._escape)
            self._reset(in_frame=True)
            if incomplete:
                return FrameError("desync")
            return None
        if not self._in_frame:
            return None  # hunting for a flag
        if byte == ESCAPE:
            if self._escape:
                self._reset()
                return FrameError("desync")
            self._escape = True
            return None
        if self._escape:
            self._escape = False
            if byte not in (FLAG ^ ESCAPE_XOR, ESCAPE ^ ESCAPE_XOR):
                self._reset()
                return FrameError("desync")
            byte ^= ESCAPE_XOR
        self._buf.append(byte)
        return self._maybe_complete()

    def _maybe_complete(self):
        if len(self._buf) < HEADER_LEN:
            return None
        payload_len = int.from_bytes(self._buf[3:5], "big")
        if payload_len > MAX_PAYLOAD:
            seq, msg_type = self._buf[2], self._buf[1]
            self._reset()
            return FrameError("bad_length", seq=seq, msg_type=msg_type)
        total = HEADER_LEN + payload_len + 2
        if len(self._buf) < total:
            return None
        content = bytes(self._buf[: HEADER_LEN + payload_len])
        received_crc = int.from_bytes(self._buf[HEADER_LEN + payload_len: total], "big")
        self._reset()
        if crc16(content) != received_crc:
            return FrameError("bad_crc")
        version, msg_type, seq = content[0], content[1], content[2]
        payload = content[HEADER_LEN:]
        try:
            known = MsgType(msg_type)
        except ValueError:
            return FrameError("unknown_type", seq=seq, msg_type=msg_type)
        if PAYLOAD_SIZES[known] != payload_len:
            return FrameError("bad_length", seq=seq, msg_type=msg_type)
        return FrameDecoded(Frame(msg_type=known, seq=seq, payload=payload,
                                  version=version))


# Payload helpers -----------------------------------------------------------

def set_relay_payload(on: bool) -> bytes:
    return bytes([0x01 if on else 0x00])


def prediction_payload(rul_class: int, confidence: float) -> bytes:
    """Class byte plus confidence in thousandths, big-endian."""
    thousandths = max(0, min(1000, int(round(confidence * 1000))))
    return bytes([rul_class]) + thousandths.to_bytes(2, "big")


def parse_prediction(payload: bytes):
    return payload[0], int.from_bytes(payload[1:3], "big") / 1000.0


def telemetry_payload(pin: int, value: float) -> bytes:
    return bytes([pin]) + struct.pack(">f", value)


def parse_telemetry(payload: bytes):
    return payload[0], struct.unpack(">f", payload[1:5])[0]


# Device simulator ----------------------------------------------------------

@dataclass
class DeviceSim:
    """Stand-in for the relay microcontroller. Relay state changes only
    through valid SET_RELAY frames. Clearing `alive` silences heartbeats
    (fault injection)."""

    relay_on: bool = False
    heartbeat_interval: float = 1.0
    last_seq_seen: int | None = None
    alive: bool = True
    _seq: int = 0
    _next_heartbeat: float = 0.0

    def _next_seq(self) -> int:
        seq = self._seq
        self._seq = (seq + 1) & 0xFF
        return seq

    def handle_frame(self, frame: Frame) -> list:
        self.last_seq_seen = frame.seq
        try:
            known = MsgType(frame.msg_type)
        except ValueError:
            return [Frame(MsgType.NACK, self._next_seq(),
                          bytes([frame.seq, NACK_UNKNOWN_TYPE]))]
        if known is MsgType.PING:
            return [Frame(MsgType.PONG, frame.seq)]
        if known is MsgType.SET_RELAY:
            self.relay_on = frame.payload[0] == 0x01
            return [
                Frame(MsgType.ACK, self._next_seq(), bytes([frame.seq])),
                Frame(MsgType.RELAY_STATE, self._next_seq(),
                      set_relay_payload(self.relay_on)),
            ]
        if known is MsgType.PREDICTION:
            # the device only actuates; model inference stays host-side
            return [Frame(MsgType.ACK, self._next_seq(), bytes([frame.seq]))]
        return []

    def handle_error(self, error: FrameError) -> list:
        if error.reason == "unknown_type" and error.seq is not None:
            return [Frame(MsgType.NACK, self._next_seq(),
                          bytes([error.seq, NACK_UNKNOWN_TYPE]))]
        return []

    def poll(self, now: float) -> list:
        """Heartbeat frames due at `now` (at most one per poll)."""
        if self.alive and now >= self._next_heartbeat:
            self._next_heartbeat = now + self.heartbeat_interval
            return [Frame(MsgType.HEARTBEAT, self._next_seq())]
        return []


class LoopbackLink:
    """In-process host endpoint wired to a DeviceSim through real encoded
    byte streams in both directions."""

    def __init__(self, sim: DeviceSim | None = None):
        self.sim = sim or DeviceSim()
        self._to_device = Decoder()
        self._to_host = Decoder()
        self._seq = 0

    def _next_seq(self) -> int:
        seq = self._seq
        self._seq = (seq + 1) & 0xFF
        return seq

    def _hear(self, frames) -> list:
        """Run device reply frames through the wire back to the host."""
        replies = []
        for frame in frames:
            for event in self._to_host.feed(encode_frame(frame)):
                if isinstance(event, FrameDecoded):
                    replies.append(event.frame)
        return replies

    def send(self, msg_type: MsgType, payload: bytes = b"") -> list:
        """Encode and deliver one frame; returns decoded device replies."""
        frame = Frame(msg_type, self._next_seq(), payload)
        replies = []
        for event in self._to_device.feed(encode_frame(frame)):
            if isinstance(event, FrameDecoded):
                replies.extend(self._hear(self.sim.handle_frame(event.frame)))
            else:
                replies.extend(self._hear(self.sim.handle_error(event)))
        return replies

    def poll(self, now: float) -> list:
        """Pump the device clock; returns frames it sent (heartbeats)."""
        return self._hear(self.sim.poll(now))


class SerialLink:
    """Same interface over a real serial port (RUL_SERIAL_PORT)."""

    def __init__(self, port: str, baudrate: int = 115200, timeout: float = 0.1):
        try:
            import serial
        except ImportError as exc:
            raise RuntimeError(
                "pyserial is required for a real serial port; "
                "install the [serial] extra") from exc
        self._port = serial.Serial(port, baudrate=baudrate, timeout=timeout)
        self._decoder = Decoder()
        self._seq = 0

    def _next_seq(self) -> int:
        seq = self._seq
        self._seq = (seq + 1) & 0xFF
        return seq

    def send(self, msg_type: MsgType, payload: bytes = b"") -> list:
        self._port.write(encode_frame(Frame(msg_type, self._next_seq(), payload)))
        return self.poll(0.0)

    def poll(self, now: float) -> list:
        data = self._port.read(self._port.in_waiting or 1)
        return [e.frame for e in self._decoder.feed(data)
                if isinstance(e, FrameDecoded)]


def open_link() -> LoopbackLink | SerialLink:
    """Serial port when RUL_SERIAL_PORT is set, else the simulator."""
    port = os.environ.get("RUL_SERIAL_PORT")
    if port:
        return SerialLink(port)
    return LoopbackLink()
