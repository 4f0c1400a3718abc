"""Standard MIDI File (format 0/1) reading, plus a small writer for fixtures.

Only what performance analysis needs is extracted: note-on events with
velocity > 0, timed in seconds via the tempo map (set-tempo meta events,
120 BPM when absent). Everything else in the file is skipped.
"""

from __future__ import annotations

import struct

from ..errors import EmptyPerformanceError, MidiParseError
from .types import PerformanceTrack

DEFAULT_TEMPO_US = 500_000  # microseconds per quarter note == 120 BPM

_META = 0xFF
_META_SET_TEMPO = 0x51
_META_END_OF_TRACK = 0x2F


def _read_vlq(data: bytes, pos: int) -> tuple[int, int]:
    """Decode a variable-length quantity, returning (value, next position)."""
    value = 0
    for _ in range(4):
        if pos >= len(data):
            raise MidiParseError("truncated variable-length quantity", pos)
        byte = data[pos]
        pos += 1
        value = (value << 7) | (byte & 0x7F)
        if not byte & 0x80:
            return value, pos
    raise MidiParseError("variable-length quantity longer than 4 bytes", pos)


def _encode_vlq(value: int) -> bytes:
    out = [value & 0x7F]
    value >>= 7
    while value:
        out.append(0x80 | (value & 0x7F))
        value >>= 7
    return bytes(reversed(out))


def _parse_track(data: bytes, base: int) -> tuple[list[tuple[int, int]], list[tuple[int, int]]]:
    """Scan one MTrk payload for note-ons and tempo changes, in absolute ticks."""
    notes: list[tuple[int, int]] = []  # (abs_tick, pitch)
    tempos: list[tuple[int, int]] = []  # (abs_tick, tempo_us)
    pos = 0
    tick = 0
    running_status = None
    while pos < len(data):
        delta, pos = _read_vlq(data, pos)
        tick += delta
        if pos >= len(data):
            raise MidiParseError("event truncated after delta time", base + pos)
        status = data[pos]
        if status >= 0x80:
            pos += 1
            if status < 0xF0:
                running_status = status
        else:
            if running_status is None:
                raise MidiParseError("data byte with no running status", base + pos)
            status = running_status

        if status == _META:
            if pos + 1 > len(data):
                raise MidiParseError("meta event truncated", base + pos)
            meta_type = data[pos]
            pos += 1
            length, pos = _read_vlq(data, pos)
            if pos + length > len(data):
                raise MidiParseError("meta event payload truncated", base + pos)
            payload = data[pos : pos + length]
            pos += length
            if meta_type == _META_SET_TEMPO:
                if length != 3:
                    raise MidiParseError("set-tempo meta event must carry 3 bytes", base + pos - length)
                tempos.append((tick, int.from_bytes(payload, "big")))
            elif meta_type == _META_END_OF_TRACK:
                break
        elif status in (0xF0, 0xF7):  # sysex
            length, pos = _read_vlq(data, pos)
            if pos + length > len(data):
                raise MidiParseError("sysex payload truncated", base + pos)
            pos += length
        else:
            kind = status & 0xF0
            n_data = 1 if kind in (0xC0, 0xD0) else 2
            if pos + n_data > len(data):
                raise MidiParseError("channel event truncated", base + pos)
            if kind == 0x90 and data[pos + 1] > 0:  # note-on, velocity > 0
                notes.append((tick, data[pos]))
            pos += n_data
    return notes, tempos


def _ticks_to_seconds(
    note_ticks: list[tuple[int, int]], tempos: list[tuple[int, int]], tpq: int
) -> list[tuple[int, float]]:
    """Convert (tick, pitch) events to (pitch, seconds) under the tempo map."""
    tempos = sorted(tempos)
    events = sorted(note_ticks)
    out = []
    seg_start_tick = 0
    seg_start_sec = 0.0
    tempo = DEFAULT_TEMPO_US
    ti = 0
    for tick, pitch in events:
        while ti < len(tempos) and tempos[ti][0] <= tick:
            change_tick, new_tempo = tempos[ti]
            seg_start_sec += (change_tick - seg_start_tick) / tpq * tempo / 1e6
            seg_start_tick = change_tick
            tempo = new_tempo
            ti += 1
        seconds = seg_start_sec + (tick - seg_start_tick) / tpq * tempo / 1e6
        out.append((pitch, seconds))
    return out


def parse_smf(data: bytes) -> PerformanceTrack:
    """Parse a format 0/1 Standard MIDI File into a PerformanceTrack.

    Raises MidiParseError (with the byte offset) on malformed input and
    EmptyPerformanceError when the file holds no note-on events.
    """
    if len(data) < 14 or data[:4] != b"MThd":
        raise MidiParseError("missing MThd header", 0)
    header_len = struct.unpack(">I", data[4:8])[0]
    if header_len != 6:
        raise MidiParseError(f"MThd length {header_len}, expected 6", 4)
    fmt, n_tracks, division = struct.unpack(">HHH", data[8:14])
    if fmt not in (0, 1):
        raise MidiParseError(f"unsupported SMF format {fmt}", 8)
    if division & 0x8000:
        raise MidiParseError("SMPTE time division is not supported", 12)
    if division == 0:
        raise MidiParseError("ticks-per-quarter of zero", 12)

    pos = 8 + header_len
    all_notes: list[tuple[int, int]] = []
    all_tempos: list[tuple[int, int]] = []
    tracks_seen = 0
    while tracks_seen < n_tracks:
        if pos + 8 > len(data):
            raise MidiParseError(f"expected {n_tracks} tracks, found {tracks_seen}", pos)
        chunk_type = data[pos : pos + 4]
        chunk_len = struct.unpack(">I", data[pos + 4 : pos + 8])[0]
        body_start = pos + 8
        if body_start + chunk_len > len(data):
            raise MidiParseError("chunk extends past end of file", pos + 4)
        if chunk_type == b"MTrk":
            notes, tempos = _parse_track(data[body_start : body_start + chunk_len], body_start)
            all_notes.extend(notes)
            all_tempos.extend(tempos)
            tracks_seen += 1
        # per the SMF spec, unknown chunk types are skipped
        pos = body_start + chunk_len

    if not all_notes:
        raise EmptyPerformanceError("MIDI file contains no note-on events")

    events = _ticks_to_seconds(all_notes, all_tempos, division)
    first_tempo = sorted(all_tempos, key=lambda t: t[0])[0][1] if all_tempos else DEFAULT_TEMPO_US
    return PerformanceTrack(events=tuple(events), bpm=60e6 / first_tempo)


def build_smf(
    notes: list[tuple[int, int, int]],
    tpq: int = 480,
    tempo_changes: list[tuple[int, int]] | None = None,
) -> bytes:
    """Write a single-track format 0 file from (pitch, onset_tick, duration_tick) notes.

    Used by tests and fixture generation; `tempo_changes` is a list of
    (tick, microseconds-per-quarter) pairs.
    """
    if tempo_changes is None:
        tempo_changes = [(0, DEFAULT_TEMPO_US)]
    messages: list[tuple[int, int, bytes]] = []  # (tick, sort order, payload)
    for tick, tempo in tempo_changes:
        messages.append((tick, 0, bytes([_META, _META_SET_TEMPO, 3]) + tempo.to_bytes(3, "big")))
    for pitch, onset, duration in notes:
        messages.append((onset, 1, bytes([0x90, pitch, 64])))
        messages.append((onset + duration, 2, bytes([0x80, pitch, 0])))
    messages.sort(key=lambda m: (m[0], m[1]))

    body = bytearray()
    prev_tick = 0
    for tick, _, payload in messages:
        body += _encode_vlq(tick - prev_tick)
        body += payload
        prev_tick = tick
    body += _encode_vlq(0) + bytes([_META, _META_END_OF_TRACK, 0])

    header = b"MThd" + struct.pack(">IHHH", 6, 0, 1, tpq)
    return header + b"MTrk" + struct.pack(">I", len(body)) + bytes(body)
