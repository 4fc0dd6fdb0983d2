"""Bit-exact wire format for streaming stimulus schedules.

This module is the normative definition of the format. All integers are
little-endian and fixed width; all floats are IEEE-754 binary64.

Frame layout::

    magic        4 bytes  b"SVX1"
    type         u8       0x01 phase-frame | 0x02 cannon-trigger | 0x03 end
    timestamp    u64      emission time, microseconds
    payload_len  u16
    payload      payload_len bytes
    crc32        u32      CRC-32 (zlib polynomial) of header + payload

A stream is a sequence of frames with non-decreasing timestamps,
terminated by exactly one end frame (empty payload, 19 bytes total).

Phase-frame payload::

    rows         u8
    cols         u8
    delay        u16 * rows*cols   per-transducer delay, counts of 1/256
                                   carrier period (quantization error
                                   <= 1/512 period)
    intensity    u16               drive intensity, 0..1248
    focal_index  u16
    carrier_hz   f64
    on_duration  f64  seconds
    arrival      f64  seconds, predicted
    target       f64 * 3  meters

Cannon-trigger payload::

    cannon_id    u16
    arrival      f64  seconds, predicted
    target       f64 * 3  meters

Delays ride as carrier-period fractions rather than absolute time because
phase is what the transducer hardware consumes.
"""

from __future__ import annotations

import struct
import zlib

import numpy as np

from .acoustic import INTENSITY_FULL_SCALE, DelayTable
from .errors import DecodeError, EncodingError
from .geometry import Point3
from .scheduler import CannonTriggerEvent, PhaseFrameEvent, StimulusSchedule

MAGIC = b"SVX1"
FRAME_PHASE = 0x01
FRAME_CANNON = 0x02
FRAME_END = 0x03

_FRAME_NAMES = {FRAME_PHASE: "phase-frame", FRAME_CANNON: "cannon-trigger", FRAME_END: "end"}

_HEADER = struct.Struct("<4sBQH")
_CRC = struct.Struct("<I")
_PHASE_TAIL = struct.Struct("<HHdddddd")  # intensity, focal_index, carrier, duration, arrival, target xyz
_CANNON = struct.Struct("<Hdddd")  # cannon_id, arrival, target xyz

HEADER_SIZE = _HEADER.size
END_FRAME_SIZE = HEADER_SIZE + _CRC.size

#: Delay quantization denominator: counts per carrier period.
DELAY_COUNTS_PER_PERIOD = 256
MAX_U16 = 0xFFFF
MAX_U64 = 0xFFFFFFFFFFFFFFFF


def _timestamp_us(emit_time: float, index: int) -> int:
    ts = round(emit_time * 1e6)
    if ts < 0 or ts > MAX_U64:
        raise EncodingError(f"emit time {emit_time} outside the u64 microsecond range", index)
    return ts


def _encode_frame(frame_type: int, timestamp_us: int, payload: bytes) -> bytes:
    header = _HEADER.pack(MAGIC, frame_type, timestamp_us, len(payload))
    return header + payload + _CRC.pack(zlib.crc32(header + payload))


def _phase_payload(event: PhaseFrameEvent, index: int) -> bytes:
    rows, cols = event.delays.shape
    if rows > 0xFF or cols > 0xFF:
        raise EncodingError(f"delay table {rows}x{cols} exceeds u8 dimensions", index)
    scale = event.carrier_frequency_hz * DELAY_COUNTS_PER_PERIOD
    counts = []
    for d in event.delays.delays.ravel():
        q = round(d * scale)
        if q < 0 or q > MAX_U16:
            raise EncodingError(
                f"delay {d} s quantizes to {q} counts, outside [0, {MAX_U16}]; normalize the table first",
                index,
            )
        counts.append(q)
    intensity = round(event.intensity)
    if intensity < 0 or intensity > INTENSITY_FULL_SCALE:
        raise EncodingError(f"intensity {event.intensity} outside [0, {INTENSITY_FULL_SCALE:g}]", index)
    if event.focal_index < 0 or event.focal_index > MAX_U16:
        raise EncodingError(f"focal index {event.focal_index} outside u16 range", index)
    payload = struct.pack("<BB", rows, cols)
    payload += struct.pack(f"<{rows * cols}H", *counts)
    payload += _PHASE_TAIL.pack(
        intensity,
        event.focal_index,
        event.carrier_frequency_hz,
        event.on_duration,
        event.predicted_arrival,
        event.target.x,
        event.target.y,
        event.target.z,
    )
    if len(payload) > MAX_U16:
        raise EncodingError(f"phase payload of {len(payload)} bytes exceeds u16 length field", index)
    return payload


def _cannon_payload(event: CannonTriggerEvent, index: int) -> bytes:
    if event.cannon_id < 0 or event.cannon_id > MAX_U16:
        raise EncodingError(f"cannon id {event.cannon_id} outside u16 range", index)
    return _CANNON.pack(
        event.cannon_id,
        event.predicted_arrival,
        event.target.x,
        event.target.y,
        event.target.z,
    )


def encode(schedule: StimulusSchedule) -> bytes:
    """Serialize a schedule; one frame per event plus the terminal end frame."""
    out = bytearray()
    last_ts = 0
    for index, event in enumerate(schedule.events):
        ts = _timestamp_us(event.emit_time, index)
        if isinstance(event, PhaseFrameEvent):
            out += _encode_frame(FRAME_PHASE, ts, _phase_payload(event, index))
        elif isinstance(event, CannonTriggerEvent):
            out += _encode_frame(FRAME_CANNON, ts, _cannon_payload(event, index))
        else:  # pragma: no cover - schedule validation forbids this
            raise EncodingError(f"unknown event type {type(event).__name__}", index)
        last_ts = ts
    out += _encode_frame(FRAME_END, last_ts, b"")
    return bytes(out)


def _read_frame(data: bytes, offset: int) -> tuple[int, int, bytes, int]:
    """Parse one frame at ``offset``; returns (type, timestamp_us, payload, next_offset)."""
    if len(data) - offset < HEADER_SIZE:
        raise DecodeError(f"truncated header: {len(data) - offset} bytes left", offset)
    magic, frame_type, ts, length = _HEADER.unpack_from(data, offset)
    if magic != MAGIC:
        raise DecodeError(f"bad magic {magic!r}", offset)
    if frame_type not in _FRAME_NAMES:
        raise DecodeError(f"unknown frame type 0x{frame_type:02x}", offset + 4)
    body_end = offset + HEADER_SIZE + length
    if len(data) < body_end + _CRC.size:
        raise DecodeError(f"truncated frame: need {body_end + _CRC.size - offset} bytes, have {len(data) - offset}", offset)
    payload = data[offset + HEADER_SIZE : body_end]
    (crc,) = _CRC.unpack_from(data, body_end)
    actual = zlib.crc32(data[offset:body_end])
    if crc != actual:
        raise DecodeError(f"CRC mismatch: stored 0x{crc:08x}, computed 0x{actual:08x}", body_end)
    return frame_type, ts, payload, body_end + _CRC.size


def _decode_phase(payload: bytes, ts_us: int, offset: int) -> PhaseFrameEvent:
    if len(payload) < 2:
        raise DecodeError("phase payload shorter than its dimension bytes", offset)
    rows, cols = struct.unpack_from("<BB", payload, 0)
    expected = 2 + 2 * rows * cols + _PHASE_TAIL.size
    if len(payload) != expected:
        raise DecodeError(f"phase payload is {len(payload)} bytes, expected {expected} for {rows}x{cols}", offset)
    if rows < 1 or cols < 1:
        raise DecodeError(f"phase payload has empty delay table {rows}x{cols}", offset)
    counts = struct.unpack_from(f"<{rows * cols}H", payload, 2)
    intensity, focal_index, carrier, duration, arrival, tx, ty, tz = _PHASE_TAIL.unpack_from(
        payload, 2 + 2 * rows * cols
    )
    if not carrier > 0:
        raise DecodeError(f"phase payload carrier frequency {carrier} must be > 0", offset)
    if intensity > INTENSITY_FULL_SCALE:
        raise DecodeError(f"intensity {intensity} above full scale {INTENSITY_FULL_SCALE:g}", offset)
    scale = carrier * DELAY_COUNTS_PER_PERIOD
    delays = np.array(counts, dtype=float).reshape(rows, cols) / scale
    return PhaseFrameEvent(
        emit_time=ts_us / 1_000_000,
        target=Point3(tx, ty, tz),
        delays=DelayTable(delays),
        intensity=float(intensity),
        on_duration=duration,
        carrier_frequency_hz=carrier,
        predicted_arrival=arrival,
        focal_index=focal_index,
    )


def _decode_cannon(payload: bytes, ts_us: int, offset: int) -> CannonTriggerEvent:
    if len(payload) != _CANNON.size:
        raise DecodeError(f"cannon payload is {len(payload)} bytes, expected {_CANNON.size}", offset)
    cannon_id, arrival, tx, ty, tz = _CANNON.unpack(payload)
    return CannonTriggerEvent(
        emit_time=ts_us / 1_000_000,
        cannon_id=cannon_id,
        target=Point3(tx, ty, tz),
        predicted_arrival=arrival,
    )


def decode(data: bytes) -> StimulusSchedule:
    """Inverse of :func:`encode`, exact except for delay quantization."""
    events = []
    offset = 0
    last_ts = None
    saw_end = False
    while offset < len(data):
        frame_offset = offset
        frame_type, ts, payload, offset = _read_frame(data, offset)
        if last_ts is not None and ts < last_ts:
            raise DecodeError(f"timestamp {ts} us decreases from {last_ts} us", frame_offset)
        last_ts = ts
        if frame_type == FRAME_END:
            if payload:
                raise DecodeError(f"end frame carries {len(payload)} payload bytes", frame_offset)
            saw_end = True
            if offset != len(data):
                raise DecodeError(f"{len(data) - offset} trailing bytes after end frame", offset)
            break
        if frame_type == FRAME_PHASE:
            events.append(_decode_phase(payload, ts, frame_offset))
        else:
            events.append(_decode_cannon(payload, ts, frame_offset))
    if not saw_end:
        raise DecodeError("stream has no end frame", len(data))
    return StimulusSchedule.from_events(events)


def emulate(data: bytes) -> list[tuple[int, str, str]]:
    """Loopback replay: decode and log (timestamp_us, type, summary) per frame."""
    schedule = decode(data)
    log = []
    for event in schedule.events:
        ts = round(event.emit_time * 1e6)
        if isinstance(event, PhaseFrameEvent):
            rows, cols = event.delays.shape
            summary = (
                f"{rows}x{cols} table, intensity {event.intensity:g}, "
                f"on {event.on_duration * 1e3:.3f} ms, target ({event.target.x:.4f}, {event.target.y:.4f}, {event.target.z:.4f})"
            )
        else:
            summary = f"cannon {event.cannon_id}, target ({event.target.x:.4f}, {event.target.y:.4f}, {event.target.z:.4f})"
        log.append((ts, event.kind, summary))
    log.append((round(schedule.events[-1].emit_time * 1e6) if schedule.events else 0, "end", "end of stream"))
    return log
