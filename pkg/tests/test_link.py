import struct

import numpy as np
import pytest

from rulkit.link import (
    FLAG,
    MAX_PAYLOAD,
    DeviceSim,
    Decoder,
    Frame,
    FrameDecoded,
    FrameError,
    LoopbackLink,
    MsgType,
    PAYLOAD_SIZES,
    crc16,
    encode_frame,
    parse_prediction,
    parse_telemetry,
    prediction_payload,
    set_relay_payload,
    telemetry_payload,
)


def crc16_bitwise_oracle(data: bytes) -> int:
    """Plain shift-register CRC-16/CCITT-FALSE, bit by bit."""
    crc = 0xFFFF
    for byte in data:
        crc ^= byte << 8
        for _ in range(8):
            if crc & 0x8000:
                crc = ((crc << 1) ^ 0x1021) & 0xFFFF
            else:
                crc = (crc << 1) & 0xFFFF
    return crc


def random_frame(rng) -> Frame:
    msg_type = MsgType(int(rng.integers(1, 10)))
    payload = bytes(rng.integers(0, 256, size=PAYLOAD_SIZES[msg_type], dtype=np.uint8))
    return Frame(msg_type=msg_type, seq=int(rng.integers(0, 256)), payload=payload)


class TestCrc16:
    def test_standard_check_value(self):
        assert crc16(b"123456789") == 0x29B1
        assert crc16_bitwise_oracle(b"123456789") == 0x29B1

    def test_empty_input_is_init_value(self):
        assert crc16(b"") == 0xFFFF
        assert crc16_bitwise_oracle(b"") == 0xFFFF

    def test_matches_bitwise_oracle_on_random_data(self):
        rng = np.random.default_rng(0)
        for _ in range(200):
            data = bytes(rng.integers(0, 256, size=int(rng.integers(0, 64)),
                                      dtype=np.uint8))
            assert crc16(data) == crc16_bitwise_oracle(data)

    def test_single_bit_flip_always_changes_crc(self):
        rng = np.random.default_rng(1)
        for _ in range(10_000):
            data = bytearray(rng.integers(0, 256, size=int(rng.integers(1, 32)),
                                          dtype=np.uint8))
            reference = crc16(bytes(data))
            i = int(rng.integers(0, len(data)))
            data[i] ^= 1 << int(rng.integers(0, 8))
            assert crc16(bytes(data)) != reference


class TestEncode:
    def test_ping_frame_bytes(self):
        encoded = encode_frame(Frame(MsgType.PING, seq=0))
        content = bytes([0x01, 0x01, 0x00, 0x00, 0x00])
        crc = crc16_bitwise_oracle(content)
        assert encoded == bytes([FLAG]) + content + crc.to_bytes(2, "big")

    def test_payload_with_flag_byte_is_stuffed(self):
        payload = bytes([0x7E])
        encoded = encode_frame(Frame(MsgType.SET_RELAY, seq=1, payload=payload))
        assert encoded.count(0x7E) == 1  # only the start byte survives raw
        assert bytes([0x7D, 0x5E]) in encoded

    def test_escape_byte_is_stuffed(self):
        encoded = encode_frame(Frame(MsgType.SET_RELAY, seq=1, payload=bytes([0x7D])))
        assert bytes([0x7D, 0x5D]) in encoded

    def test_oversize_payload_rejected(self):
        with pytest.raises(ValueError):
            encode_frame(Frame(MsgType.TELEMETRY, seq=0,
                               payload=bytes(MAX_PAYLOAD + 1)))

    def test_round_trip_random_frames(self):
        rng = np.random.default_rng(2)
        decoder = Decoder()
        for _ in range(10_000):
            frame = random_frame(rng)
            events = decoder.feed(encode_frame(frame))
            assert len(events) == 1
            assert isinstance(events[0], FrameDecoded)
            assert events[0].frame == frame


class TestDecoder:
    def test_byte_at_a_time_equals_whole_buffer(self):
        frame = Frame(MsgType.PREDICTION, seq=7, payload=prediction_payload(0, 0.91))
        encoded = encode_frame(frame)
        whole = Decoder().feed(encoded)
        dribble = Decoder()
        events = []
        for i in range(len(encoded)):
            events.extend(dribble.feed(encoded[i: i + 1]))
        assert events == whole
        assert isinstance(events[0], FrameDecoded)

    def test_random_rechunking_never_changes_events(self):
        rng = np.random.default_rng(3)
        frames = [random_frame(rng) for _ in range(20)]
        stream = b"".join(encode_frame(f) for f in frames)
        reference = Decoder().feed(stream)
        for _ in range(50):
            cuts = sorted(rng.integers(0, len(stream) + 1,
                                       size=int(rng.integers(0, 12))).tolist())
            decoder = Decoder()
            events = []
            last = 0
            for cut in cuts + [len(stream)]:
                events.extend(decoder.feed(stream[last:cut]))
                last = cut
            assert events == reference

    def test_bad_crc_then_recovery(self):
        frame = Frame(MsgType.PING, seq=3)
        corrupted = bytearray(encode_frame(frame))
        corrupted[-1] ^= 0xFF  # flip a CRC byte
        decoder = Decoder()
        events = decoder.feed(bytes(corrupted))
        assert events == [FrameError("bad_crc")]
        events = decoder.feed(encode_frame(frame))
        assert events == [FrameDecoded(frame)]

    def test_noise_then_valid_frame(self):
        rng = np.random.default_rng(4)
        frame = Frame(MsgType.HEARTBEAT, seq=9)
        for _ in range(50):
            noise = bytes(rng.integers(0, 256, size=40, dtype=np.uint8))
            decoder = Decoder()
            events = decoder.feed(noise)
            assert all(isinstance(e, FrameError) for e in events)
            tail = decoder.feed(encode_frame(frame))
            decoded = [e for e in events + tail if isinstance(e, FrameDecoded)]
            assert decoded and decoded[-1].frame == frame

    def test_unknown_type_reports_seq(self):
        content = bytes([0x01, 0x7F, 0x05, 0x00, 0x00])
        raw = bytes([FLAG]) + content + crc16_bitwise_oracle(content).to_bytes(2, "big")
        events = Decoder().feed(raw)
        assert events == [FrameError("unknown_type", seq=0x05, msg_type=0x7F)]

    def test_type_length_mismatch_is_bad_length(self):
        content = bytes([0x01, 0x01, 0x00, 0x00, 0x01, 0xAB])  # PING with 1 byte
        raw = bytes([FLAG]) + content + crc16_bitwise_oracle(content).to_bytes(2, "big")
        events = Decoder().feed(raw)
        assert events == [FrameError("bad_length", seq=0x00, msg_type=0x01)]

    def test_oversize_length_field_is_bad_length(self):
        content = bytes([0x01, 0x06, 0x00, 0x01, 0x01])  # payload_len = 257
        raw = bytes([FLAG]) + content
        events = Decoder().feed(raw)
        assert events == [FrameError("bad_length", seq=0x00, msg_type=0x06)]

    def test_single_byte_corruption_never_silently_accepted(self):
        rng = np.random.default_rng(5)
        for _ in range(5_000):
            frame = random_frame(rng)
            encoded = bytearray(encode_frame(frame))
            i = int(rng.integers(0, len(encoded)))
            old = encoded[i]
            new = int(rng.integers(0, 256))
            while new == old:
                new = int(rng.integers(0, 256))
            encoded[i] = new
            events = Decoder().feed(bytes(encoded))
            assert not any(isinstance(e, FrameDecoded) for e in events), \
                f"corruption at {i} ({old:#x}->{new:#x}) decoded {events}"


class TestPayloadHelpers:
    def test_prediction_round_trip(self):
        cls, conf = parse_prediction(prediction_payload(2, 0.754))
        assert cls == 2
        assert conf == pytest.approx(0.754, abs=5e-4)

    def test_telemetry_round_trip(self):
        pin, value = parse_telemetry(telemetry_payload(9, 3.75))
        assert pin == 9
        assert value == pytest.approx(3.75, rel=1e-6)

    def test_telemetry_is_big_endian_binary32(self):
        payload = telemetry_payload(1, 1.0)
        assert payload == bytes([1]) + struct.pack(">f", 1.0)


class TestDeviceSim:
    def test_set_relay_on(self):
        sim = DeviceSim()
        replies = sim.handle_frame(Frame(MsgType.SET_RELAY, seq=5,
                                         payload=set_relay_payload(True)))
        assert sim.relay_on
        assert [r.msg_type for r in replies] == [MsgType.ACK, MsgType.RELAY_STATE]
        assert replies[0].payload == bytes([5])
        assert replies[1].payload == bytes([1])

    def test_ping_pong_same_seq(self):
        replies = DeviceSim().handle_frame(Frame(MsgType.PING, seq=77))
        assert replies == [Frame(MsgType.PONG, seq=77)]

    def test_unknown_type_nacked_relay_unchanged(self):
        sim = DeviceSim()
        replies = sim.handle_frame(Frame(0x7F, seq=4))
        assert len(replies) == 1
        assert replies[0].msg_type == MsgType.NACK
        assert replies[0].payload == bytes([4, 0x01])
        assert not sim.relay_on

    def test_prediction_only_acked(self):
        sim = DeviceSim()
        replies = sim.handle_frame(Frame(MsgType.PREDICTION, seq=8,
                                         payload=prediction_payload(0, 1.0)))
        assert [r.msg_type for r in replies] == [MsgType.ACK]
        assert not sim.relay_on  # device never acts on predictions itself

    def test_heartbeat_emitted_on_interval(self):
        sim = DeviceSim(heartbeat_interval=1.0)
        assert [f.msg_type for f in sim.poll(0.0)] == [MsgType.HEARTBEAT]
        assert sim.poll(0.5) == []
        assert [f.msg_type for f in sim.poll(1.0)] == [MsgType.HEARTBEAT]

    def test_relay_equals_last_acknowledged_set_relay(self):
        rng = np.random.default_rng(6)
        sim = DeviceSim()
        last = False
        for _ in range(200):
            want = bool(rng.integers(0, 2))
            replies = sim.handle_frame(Frame(MsgType.SET_RELAY,
                                             seq=int(rng.integers(0, 256)),
                                             payload=set_relay_payload(want)))
            assert any(r.msg_type == MsgType.ACK for r in replies)
            last = want
            assert sim.relay_on == last


class TestLoopbackLink:
    def test_set_relay_round_trip_over_wire(self):
        link = LoopbackLink()
        replies = link.send(MsgType.SET_RELAY, set_relay_payload(True))
        assert [r.msg_type for r in replies] == [MsgType.ACK, MsgType.RELAY_STATE]
        assert link.sim.relay_on

    def test_poll_delivers_heartbeats(self):
        link = LoopbackLink()
        frames = link.poll(0.0)
        assert [f.msg_type for f in frames] == [MsgType.HEARTBEAT]

    def test_sequence_wraps_at_one_byte(self):
        link = LoopbackLink()
        for _ in range(300):
            link.send(MsgType.PING)
        assert 0 <= link._seq <= 255
