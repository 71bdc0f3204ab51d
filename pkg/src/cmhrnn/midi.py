"""Standard MIDI File export for lead sheets, plus a minimal melody reader."""

from __future__ import annotations

from pathlib import Path

import mido

from .codec import REST, REST_CHORD, TIE, ChordSymbol, LeadSheet, timeline_from_events

TICKS_PER_BEAT = 480
TICKS_PER_SIXTEENTH = TICKS_PER_BEAT // 4
MELODY_CHANNEL = 0
CHORD_CHANNEL = 1
CHORD_OCTAVE_BASE = 48

CHORD_INTERVALS = {
    "major": (0, 4, 7),
    "minor": (0, 3, 7),
    "diminished": (0, 3, 6),
    "dominant7": (0, 4, 7, 10),
}


def melody_notes(ls: LeadSheet) -> list[tuple[int, int, int]]:
    """Sounding notes as ``(onset, length, pitch)`` in sixteenths; ties extend the previous note."""
    notes: list[list[int]] = []
    t = 0
    prev_sounding = False
    for e in ls.events:
        if e.pitch == TIE:
            if prev_sounding:
                notes[-1][1] += e.duration
        elif e.pitch == REST:
            prev_sounding = False
        else:
            notes.append([t, e.duration, e.pitch])
            prev_sounding = True
        t += e.duration
    return [tuple(n) for n in notes]


def chord_voicing(index: int) -> tuple[int, ...]:
    c = ChordSymbol.from_index(index)
    if c.is_rest:
        return ()
    return tuple(CHORD_OCTAVE_BASE + c.root + i for i in CHORD_INTERVALS[c.quality])


def _track(name: str, channel: int, notes, program: int) -> mido.MidiTrack:
    # notes: (onset, length, pitch) in sixteenths
    msgs = []
    for onset, length, pitch in notes:
        msgs.append((onset * TICKS_PER_SIXTEENTH, 1, pitch))
        msgs.append(((onset + length) * TICKS_PER_SIXTEENTH, 0, pitch))
    msgs.sort(key=lambda m: (m[0], m[1], m[2]))  # note-offs before note-ons at equal ticks
    track = mido.MidiTrack()
    track.append(mido.MetaMessage("track_name", name=name, time=0))
    track.append(mido.Message("program_change", channel=channel, program=program, time=0))
    now = 0
    for tick, on, pitch in msgs:
        kind = "note_on" if on else "note_off"
        track.append(mido.Message(kind, channel=channel, note=pitch, velocity=80 if on else 0,
                                  time=tick - now))
        now = tick
    track.append(mido.MetaMessage("end_of_track", time=0))
    return track


def export_midi(ls: LeadSheet, path, bpm: float = 120.0) -> Path:
    """Write a type-1 file: conductor track, melody on channel 0, block chords on channel 1."""
    path = Path(path)
    mid = mido.MidiFile(type=1, ticks_per_beat=TICKS_PER_BEAT)
    conductor = mido.MidiTrack()
    conductor.append(mido.MetaMessage("set_tempo", tempo=mido.bpm2tempo(bpm), time=0))
    conductor.append(mido.MetaMessage("time_signature", numerator=4, denominator=4, time=0))
    conductor.append(mido.MetaMessage("end_of_track", time=0))
    mid.tracks.append(conductor)
    mid.tracks.append(_track("melody", MELODY_CHANNEL, melody_notes(ls), program=0))

    timeline = ls.timeline or timeline_from_events(ls.events, ls.pickup)
    end = ls.total_duration
    chord_notes = []
    for idx, start, length in timeline.entries:
        if idx == REST_CHORD or start >= end:
            continue
        length = min(length, end - start)
        chord_notes.extend((start, length, p) for p in chord_voicing(idx))
    mid.tracks.append(_track("chords", CHORD_CHANNEL, chord_notes, program=0))
    mid.save(str(path))
    return path


def read_midi_ticks(path, channel: int = MELODY_CHANNEL) -> tuple[int, list[tuple[int, int, int]]]:
    """``(ticks_per_beat, [(onset_tick, length_ticks, pitch), ...])`` for one channel."""
    mid = mido.MidiFile(str(path))
    out = []
    for track in mid.tracks:
        now = 0
        open_notes: dict[int, int] = {}
        for msg in track:
            now += msg.time
            if msg.type not in ("note_on", "note_off") or msg.channel != channel:
                continue
            if msg.type == "note_on" and msg.velocity > 0:
                open_notes[msg.note] = now
            elif msg.note in open_notes:
                start = open_notes.pop(msg.note)
                out.append((start, now - start, msg.note))
    return mid.ticks_per_beat, sorted(out)


def read_midi_notes(path, channel: int = MELODY_CHANNEL) -> list[tuple[int, int, int]]:
    """Notes on one channel as ``(onset, length, pitch)`` in sixteenths (rounded)."""
    tpb, notes = read_midi_ticks(path, channel)
    q = tpb / 4
    return [(round(s / q), round(n / q), p) for s, n, p in notes]
