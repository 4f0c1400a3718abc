import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from practicegp.errors import EmptyPerformanceError, MidiParseError
from practicegp.score_perf import build_smf, parse_smf


def test_single_note_at_tick_zero():
    data = build_smf([(60, 0, 240)], tpq=480, tempo_changes=[(0, 500_000)])
    track = parse_smf(data)
    assert track.events == ((60, 0.0),)
    assert track.bpm == 120.0


def test_note_at_tick_480_is_half_second():
    # 480 ticks = 1 quarter = 0.5 s at 120 BPM
    data = build_smf([(60, 480, 240)], tpq=480, tempo_changes=[(0, 500_000)])
    track = parse_smf(data)
    assert track.events == ((60, 0.5),)


def test_default_tempo_is_120_bpm():
    data = build_smf([(72, 960, 10)], tpq=480, tempo_changes=[])
    track = parse_smf(data)
    assert track.events == ((72, 1.0),)
    assert track.bpm == 120.0


def test_tempo_change_mid_file():
    # first quarter at 120 BPM (0.5 s), second at 60 BPM (1.0 s)
    data = build_smf(
        [(60, 480, 10), (62, 960, 10)],
        tpq=480,
        tempo_changes=[(0, 500_000), (480, 1_000_000)],
    )
    track = parse_smf(data)
    assert track.events[0] == (60, 0.5)
    assert track.events[1] == (62, 1.5)


def test_velocity_zero_note_on_is_not_an_event():
    # note-off encoded as 0x90 velocity 0
    data = bytearray(build_smf([(60, 0, 100)]))
    track = parse_smf(bytes(data))
    assert len(track.events) == 1


def test_empty_track_raises_empty_performance():
    data = build_smf([], tpq=480)
    with pytest.raises(EmptyPerformanceError):
        parse_smf(data)


def test_missing_header_raises_with_offset():
    with pytest.raises(MidiParseError) as err:
        parse_smf(b"RIFF" + b"\x00" * 20)
    assert err.value.byte_offset == 0


def test_truncated_chunk_raises_with_offset():
    data = build_smf([(60, 0, 100)])
    with pytest.raises(MidiParseError) as err:
        parse_smf(data[:-6])
    assert err.value.byte_offset > 0


def test_bad_header_length_rejected():
    bad = b"MThd" + (7).to_bytes(4, "big") + b"\x00" * 8
    with pytest.raises(MidiParseError) as err:
        parse_smf(bad)
    assert err.value.byte_offset == 4


def test_smpte_division_rejected():
    import struct

    header = b"MThd" + struct.pack(">IHHH", 6, 0, 1, 0x8000 | 25)
    with pytest.raises(MidiParseError):
        parse_smf(header + b"MTrk" + struct.pack(">I", 0))


def test_format_2_rejected():
    import struct

    header = b"MThd" + struct.pack(">IHHH", 6, 2, 1, 480)
    with pytest.raises(MidiParseError) as err:
        parse_smf(header)
    assert err.value.byte_offset == 8


def test_running_status_supported():
    # two note-ons sharing one status byte
    import struct

    track = bytes(
        [0x00, 0x90, 60, 64]  # note-on with status
        + [0x60, 62, 64]  # running status note-on, delta 0x60=96 ticks
        + [0x00, 0xFF, 0x2F, 0x00]
    )
    data = b"MThd" + struct.pack(">IHHH", 6, 0, 1, 480) + b"MTrk" + struct.pack(">I", len(track)) + track
    parsed = parse_smf(data)
    assert [p for p, _ in parsed.events] == [60, 62]
    assert parsed.events[1][1] == pytest.approx(96 / 480 * 0.5)


@st.composite
def note_lists(draw):
    n = draw(st.integers(min_value=1, max_value=12))
    notes = []
    tick = 0
    for _ in range(n):
        tick += draw(st.integers(min_value=0, max_value=2000))
        notes.append((draw(st.integers(min_value=0, max_value=127)), tick, draw(st.integers(1, 480))))
    return notes


@settings(max_examples=60, deadline=None)
@given(notes=note_lists(), tempo=st.integers(min_value=100_000, max_value=2_000_000))
def test_build_then_parse_round_trips_event_list(notes, tempo):
    """parse(serialize(notes)) reproduces every onset at tick/tpq * tempo."""
    tpq = 480
    data = build_smf(notes, tpq=tpq, tempo_changes=[(0, tempo)])
    track = parse_smf(data)
    expected = sorted((pitch, tick / tpq * tempo / 1e6) for pitch, tick, _ in notes)
    got = sorted(track.events)
    assert len(got) == len(expected)
    for (p1, t1), (p2, t2) in zip(got, expected):
        assert p1 == p2
        assert t1 == pytest.approx(t2, abs=1e-12)
