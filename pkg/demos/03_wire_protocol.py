#!/usr/bin/env python3
"""Poke at the framed wire protocol: encoding, stuffing, CRC rejection,
and decoder resynchronization after noise."""

import numpy as np

from rulkit.link import (
    Decoder,
    Frame,
    FrameDecoded,
    MsgType,
    crc16,
    encode_frame,
    prediction_payload,
)

frame = Frame(MsgType.PREDICTION, seq=1, payload=prediction_payload(0, 0.987))
encoded = encode_frame(frame)
print("prediction frame:", encoded.hex(" "))
print("crc16('123456789') =", hex(crc16(b"123456789")))

stuffed = encode_frame(Frame(MsgType.SET_RELAY, seq=2, payload=bytes([0x7E])))
print("\npayload 0x7e gets escaped:", stuffed.hex(" "))

decoder = Decoder()
print("\nbyte-at-a-time decode:")
for i, byte in enumerate(encoded):
    events = decoder.feed(bytes([byte]))
    if events:
        print(f"  byte {i}: {events[0]}")

corrupted = bytearray(encoded)
corrupted[-1] ^= 0x01
print("\ncorrupted CRC ->", Decoder().feed(bytes(corrupted)))

rng = np.random.default_rng(0)
noise = bytes(rng.integers(0, 256, size=25, dtype=np.uint8))
decoder = Decoder()
junk_events = decoder.feed(noise)
recovered = decoder.feed(encoded)
print(f"\n{len(noise)} noise bytes -> {len(junk_events)} error events, then:")
print("  ", [e for e in recovered if isinstance(e, FrameDecoded)][0])
