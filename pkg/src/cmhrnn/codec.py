"""Lead-sheet codec: events, chords, multi-hot vectors and the leadsheet-v1 JSON format.

An event vector is the concatenation of five one-hot blocks::

    pitch     [0, 130)    0-127 MIDI pitch, 128 rest, 129 tie
    duration  [130, 146)  1..16 sixteenths
    chord     [146, 195)  current chord, root * 4 + quality, 48 = no chord
    next      [195, 244)  next chord, same layout
    bar       [244, 246)  244 = event starts a bar, 245 = it does not

All durations and onsets are integers counted in sixteenth notes.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from importlib import resources
from typing import Iterable, Sequence

import jsonschema
import numpy as np

N_PITCH = 130
REST = 128
TIE = 129
N_DURATION = 16
N_CHORD = 49
REST_CHORD = 48
N_BAR = 2
BAR_LENGTH = 16

PITCH_OFFSET = 0
DURATION_OFFSET = PITCH_OFFSET + N_PITCH
CHORD_OFFSET = DURATION_OFFSET + N_DURATION
NEXT_CHORD_OFFSET = CHORD_OFFSET + N_CHORD
BAR_OFFSET = NEXT_CHORD_OFFSET + N_CHORD
EVENT_DIM = BAR_OFFSET + N_BAR

SUBRANGES = {
    "pitch": (PITCH_OFFSET, DURATION_OFFSET),
    "duration": (DURATION_OFFSET, CHORD_OFFSET),
    "current_chord": (CHORD_OFFSET, NEXT_CHORD_OFFSET),
    "next_chord": (NEXT_CHORD_OFFSET, BAR_OFFSET),
    "bar": (BAR_OFFSET, EVENT_DIM),
}

QUALITIES = ("major", "minor", "diminished", "dominant7")

# Extended chord spellings are folded onto the four-quality vocabulary.
QUALITY_ALIASES = {
    "major": "major", "maj": "major", "M": "major", "": "major", "maj7": "major",
    "M7": "major", "maj9": "major", "6": "major", "add9": "major", "sus2": "major",
    "sus4": "major", "sus": "major", "aug": "major", "+": "major",
    "minor": "minor", "min": "minor", "m": "minor", "m7": "minor", "min7": "minor",
    "m6": "minor", "m9": "minor", "mmaj7": "minor",
    "diminished": "diminished", "dim": "diminished", "o": "diminished",
    "dim7": "diminished", "m7b5": "diminished", "half-diminished": "diminished",
    "dominant7": "dominant7", "7": "dominant7", "dom7": "dominant7", "9": "dominant7",
    "11": "dominant7", "13": "dominant7", "7sus4": "dominant7", "7b9": "dominant7",
}

NOTE_NAMES = ("C", "C#", "D", "Eb", "E", "F", "F#", "G", "Ab", "A", "Bb", "B")
_NAME_TO_PC = {
    "C": 0, "B#": 0, "C#": 1, "Db": 1, "D": 2, "D#": 3, "Eb": 3, "E": 4, "Fb": 4,
    "E#": 5, "F": 5, "F#": 6, "Gb": 6, "G": 7, "G#": 8, "Ab": 8, "A": 9,
    "A#": 10, "Bb": 10, "B": 11, "Cb": 11,
}

SCHEMA_VERSION = "leadsheet-v1"


class CodecError(ValueError):
    """Base class for codec failures."""


class EncodingError(CodecError):
    def __init__(self, field_name: str, value):
        super().__init__(f"{field_name} out of range: {value!r}")
        self.field = field_name


class MalformedVectorError(CodecError):
    def __init__(self, subrange: str, count: int):
        super().__init__(f"sub-range {subrange!r} has {count} active entries, expected exactly 1")
        self.subrange = subrange


class MeterError(CodecError):
    pass


class ChordError(CodecError):
    pass


class SchemaError(CodecError):
    def __init__(self, message: str, field_path: str = "", line: int | None = None):
        where = []
        if line is not None:
            where.append(f"line {line}")
        if field_path:
            where.append(f"field {field_path}")
        super().__init__(f"{message} ({', '.join(where)})" if where else message)
        self.field = field_path
        self.line = line


def pitch_class(name_or_pc) -> int:
    if isinstance(name_or_pc, (int, np.integer)) and not isinstance(name_or_pc, bool):
        if not 0 <= name_or_pc < 12:
            raise ChordError(f"pitch class out of range: {name_or_pc}")
        return int(name_or_pc)
    try:
        return _NAME_TO_PC[name_or_pc]
    except (KeyError, TypeError):
        raise ChordError(f"unknown note name {name_or_pc!r}") from None


@dataclass(frozen=True)
class ChordSymbol:
    """A chord root and quality, or the rest chord when ``root`` is None."""

    root: int | None
    quality: str | None = None

    def __post_init__(self):
        if self.root is None:
            if self.quality is not None:
                raise ChordError("rest chord takes no quality")
            return
        if not 0 <= self.root < 12:
            raise ChordError(f"chord root out of range: {self.root}")
        if self.quality not in QUALITIES:
            raise ChordError(f"unknown chord quality {self.quality!r}")

    @classmethod
    def rest(cls) -> "ChordSymbol":
        return cls(None, None)

    @classmethod
    def parse(cls, root, quality: str) -> "ChordSymbol":
        if quality not in QUALITY_ALIASES:
            raise ChordError(f"unknown chord quality {quality!r}")
        return cls(pitch_class(root), QUALITY_ALIASES[quality])

    @classmethod
    def from_index(cls, index: int) -> "ChordSymbol":
        if not 0 <= index < N_CHORD:
            raise ChordError(f"chord index out of range: {index}")
        if index == REST_CHORD:
            return cls.rest()
        return cls(index // 4, QUALITIES[index % 4])

    @property
    def is_rest(self) -> bool:
        return self.root is None

    @property
    def index(self) -> int:
        if self.root is None:
            return REST_CHORD
        return self.root * 4 + QUALITIES.index(self.quality)

    def transpose(self, semitones: int) -> "ChordSymbol":
        if self.root is None:
            return self
        return ChordSymbol((self.root + semitones) % 12, self.quality)

    def __str__(self):
        if self.root is None:
            return "N.C."
        suffix = {"major": "", "minor": "m", "diminished": "dim", "dominant7": "7"}
        return NOTE_NAMES[self.root] + suffix[self.quality]


@dataclass(frozen=True)
class MusicEvent:
    pitch: int
    duration: int
    current_chord: int
    next_chord: int
    bar_start: bool

    def validate(self) -> "MusicEvent":
        if not (isinstance(self.pitch, (int, np.integer)) and 0 <= self.pitch < N_PITCH):
            raise EncodingError("pitch", self.pitch)
        if not (isinstance(self.duration, (int, np.integer)) and 1 <= self.duration <= N_DURATION):
            raise EncodingError("duration", self.duration)
        if not (isinstance(self.current_chord, (int, np.integer)) and 0 <= self.current_chord < N_CHORD):
            raise EncodingError("current_chord", self.current_chord)
        if not (isinstance(self.next_chord, (int, np.integer)) and 0 <= self.next_chord < N_CHORD):
            raise EncodingError("next_chord", self.next_chord)
        if not isinstance(self.bar_start, (bool, np.bool_)):
            raise EncodingError("bar_start", self.bar_start)
        return self

    @property
    def is_rest(self) -> bool:
        return self.pitch == REST

    @property
    def is_tie(self) -> bool:
        return self.pitch == TIE


@dataclass(frozen=True)
class Key:
    root: int = 0
    mode: str = "major"

    def __post_init__(self):
        if not 0 <= self.root < 12:
            raise CodecError(f"key root out of range: {self.root}")
        if self.mode not in ("major", "minor"):
            raise CodecError(f"unknown key mode {self.mode!r}")


@dataclass(frozen=True)
class ChordTimeline:
    """Contiguous chord segments ``(chord_index, start, length)`` covering ``[0, end)``.

    Adjacent segments with the same chord are merged on construction, so every
    segment boundary is a chord change.
    """

    entries: tuple[tuple[int, int, int], ...]
    pickup: int = 0

    def __post_init__(self):
        merged: list[tuple[int, int, int]] = []
        pos = 0
        for chord, start, length in self.entries:
            if start != pos:
                raise CodecError(f"chord timeline not contiguous at sixteenth {start} (expected {pos})")
            if length < 1 or not 0 <= chord < N_CHORD:
                raise CodecError(f"invalid chord segment {(chord, start, length)}")
            if merged and merged[-1][0] == chord:
                c, s, n = merged[-1]
                merged[-1] = (c, s, n + length)
            else:
                merged.append((int(chord), int(start), int(length)))
            pos = start + length
        if not 0 <= self.pickup < BAR_LENGTH:
            raise MeterError(f"pickup must be in [0, 16), got {self.pickup}")
        object.__setattr__(self, "entries", tuple(merged))
        object.__setattr__(self, "_starts", np.array([s for _, s, _ in merged], dtype=np.int64))

    @classmethod
    def from_chords(cls, chords: Sequence[tuple[int, int, int]], end: int | None = None,
                    pickup: int = 0) -> "ChordTimeline":
        """Build from possibly gappy ``(index, start, length)`` triples; gaps become rest."""
        entries = []
        pos = 0
        for chord, start, length in sorted(chords, key=lambda c: c[1]):
            if start < pos:
                raise CodecError(f"overlapping chords at sixteenth {start}")
            if start > pos:
                entries.append((REST_CHORD, pos, start - pos))
            entries.append((chord, start, length))
            pos = start + length
        if end is not None and end > pos:
            entries.append((REST_CHORD, pos, end - pos))
        return cls(tuple(entries), pickup=pickup)

    @property
    def end(self) -> int:
        if not self.entries:
            return 0
        _, s, n = self.entries[-1]
        return s + n

    def _segment(self, t: int) -> int:
        return int(np.searchsorted(self._starts, t, side="right")) - 1

    def chord_at(self, t: int) -> int:
        if t < 0 or t >= self.end:
            return REST_CHORD
        return self.entries[self._segment(t)][0]

    def next_chord_at(self, t: int) -> int:
        """Chord of the first change boundary strictly after ``t``; rest chord past the end."""
        if t < 0:
            return self.entries[0][0] if self.entries else REST_CHORD
        i = self._segment(t) + 1
        if i >= len(self.entries):
            return REST_CHORD
        return self.entries[i][0]

    def is_bar_line(self, t: int) -> bool:
        return t == 0 or (t - self.pickup) % BAR_LENGTH == 0

    def check_bar_multiple(self):
        rem = (self.end - self.pickup) % BAR_LENGTH if self.pickup else self.end % BAR_LENGTH
        if rem:
            raise MeterError(f"timeline length {self.end} does not end on a bar line")

    def transpose(self, semitones: int) -> "ChordTimeline":
        out = []
        for chord, s, n in self.entries:
            out.append((ChordSymbol.from_index(chord).transpose(semitones).index, s, n))
        return ChordTimeline(tuple(out), pickup=self.pickup)


@dataclass(frozen=True)
class LeadSheet:
    events: tuple[MusicEvent, ...]
    key: Key = Key()
    timeline: ChordTimeline | None = None
    pickup: int = 0
    title: str = ""
    sections: tuple[str, ...] = ()
    meta: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "events", tuple(self.events))
        if not self.events:
            raise CodecError("lead sheet has no events")
        for e in self.events:
            e.validate()
        if self.events[0].is_tie:
            raise CodecError("a tie cannot be the first event")
        if not self.events[0].bar_start:
            raise MeterError("first event must start a bar")

    @property
    def onsets(self) -> list[int]:
        out, t = [], 0
        for e in self.events:
            out.append(t)
            t += e.duration
        return out

    @property
    def total_duration(self) -> int:
        return sum(e.duration for e in self.events)

    def with_events(self, events: Iterable[MusicEvent]) -> "LeadSheet":
        return replace(self, events=tuple(events))


# ---------------------------------------------------------------------------
# vectors


def encode_event(e: MusicEvent) -> np.ndarray:
    e.validate()
    v = np.zeros(EVENT_DIM)
    v[PITCH_OFFSET + e.pitch] = 1
    v[DURATION_OFFSET + e.duration - 1] = 1
    v[CHORD_OFFSET + e.current_chord] = 1
    v[NEXT_CHORD_OFFSET + e.next_chord] = 1
    v[BAR_OFFSET + (0 if e.bar_start else 1)] = 1
    return v


def _one_index(v: np.ndarray, name: str) -> int:
    lo, hi = SUBRANGES[name]
    block = v[lo:hi]
    hot = np.flatnonzero(block)
    if len(hot) != 1 or block[hot[0]] != 1:
        raise MalformedVectorError(name, len(hot))
    return int(hot[0])


def decode_event(v: np.ndarray) -> MusicEvent:
    v = np.asarray(v)
    if v.shape != (EVENT_DIM,):
        raise MalformedVectorError("shape", v.size)
    return MusicEvent(
        pitch=_one_index(v, "pitch"),
        duration=_one_index(v, "duration") + 1,
        current_chord=_one_index(v, "current_chord"),
        next_chord=_one_index(v, "next_chord"),
        bar_start=_one_index(v, "bar") == 0,
    )


def encode_events(events: Sequence[MusicEvent]) -> np.ndarray:
    """Vectorized encode_event over a sequence; returns ``(N, EVENT_DIM)``."""
    x = np.zeros((len(events), EVENT_DIM))
    for i, e in enumerate(events):
        e.validate()
        x[i, PITCH_OFFSET + e.pitch] = 1
        x[i, DURATION_OFFSET + e.duration - 1] = 1
        x[i, CHORD_OFFSET + e.current_chord] = 1
        x[i, NEXT_CHORD_OFFSET + e.next_chord] = 1
        x[i, BAR_OFFSET + (0 if e.bar_start else 1)] = 1
    return x


def event_targets(events: Sequence[MusicEvent]) -> np.ndarray:
    """Class indices ``(N, 3)`` for the pitch, duration and bar heads."""
    return np.array([[e.pitch, e.duration - 1, 0 if e.bar_start else 1] for e in events],
                    dtype=np.int64).reshape(-1, 3)


def compute_accumulated_time(events: Sequence[MusicEvent], pickup: int = 0) -> list[int]:
    """Position within the bar after each event, in sixteenths (1..16).

    With ``pickup > 0`` the first bar is an anacrusis of that many sixteenths and
    its positions are aligned so the pickup ends at 16.
    """
    if not events:
        return []
    if not events[0].bar_start:
        raise MeterError("first event must start a bar")
    acc, out = 0, []
    for i, e in enumerate(events):
        if e.bar_start:
            acc = (BAR_LENGTH - pickup) if (i == 0 and pickup) else 0
        acc += e.duration
        if acc > BAR_LENGTH:
            raise MeterError(f"event {i}: bar overflows to {acc} sixteenths without a bar start")
        out.append(acc)
    return out


def acc_one_hot(acc: Sequence[int]) -> np.ndarray:
    a = np.asarray(acc, dtype=np.int64)
    out = np.zeros((len(a), N_DURATION))
    out[np.arange(len(a)), a - 1] = 1
    return out


def bar_lengths(events: Sequence[MusicEvent]) -> list[int]:
    """Duration sums of each bar delimited by bar_start flags (last bar included)."""
    bars: list[int] = []
    for e in events:
        if e.bar_start or not bars:
            bars.append(0)
        bars[-1] += e.duration
    return bars


def validate_bars(events: Sequence[MusicEvent], pickup: int = 0):
    bars = bar_lengths(events)
    for i, n in enumerate(bars[:-1]):
        if i == 0 and pickup:
            if n != pickup:
                raise MeterError(f"pickup bar has {n} sixteenths, declared {pickup}")
        elif n != BAR_LENGTH:
            raise MeterError(f"bar {i} has {n} sixteenths, expected {BAR_LENGTH}")
    if bars[-1] > BAR_LENGTH:
        raise MeterError(f"final bar has {bars[-1]} sixteenths")


# ---------------------------------------------------------------------------
# leadsheet-v1 documents


def load_schema() -> dict:
    text = resources.files(__package__).joinpath("schemas/leadsheet-v1.schema.json").read_text()
    return json.loads(text)


_SCHEMA = None


def _validator():
    global _SCHEMA
    if _SCHEMA is None:
        _SCHEMA = jsonschema.Draft7Validator(load_schema())
    return _SCHEMA


def _split_at_bars(start: int, length: int, pickup: int) -> list[tuple[int, int]]:
    pieces = []
    t, end = start, start + length
    while t < end:
        if pickup and t < pickup:
            nxt = pickup
        else:
            nxt = t + BAR_LENGTH - ((t - pickup) % BAR_LENGTH)
        stop = min(end, nxt)
        pieces.append((t, stop - t))
        t = stop
    return pieces


def parse_lead_sheet(source: str | dict) -> LeadSheet:
    """Parse a leadsheet-v1 document (JSON text or already-decoded dict)."""
    if isinstance(source, str):
        try:
            doc = json.loads(source)
        except json.JSONDecodeError as exc:
            raise SchemaError(f"invalid JSON: {exc.msg}", line=exc.lineno) from None
    else:
        doc = source
    errors = sorted(_validator().iter_errors(doc), key=lambda e: list(e.absolute_path))
    if errors:
        err = errors[0]
        path = "/".join(str(p) for p in err.absolute_path)
        raise SchemaError(err.message, field_path=path or "<root>")

    if doc["meter"] != "4/4":
        raise MeterError(f"unsupported meter {doc['meter']!r}; only 4/4 is supported")
    pickup = int(doc.get("pickup_sixteenths", 0))
    key = Key(pitch_class(doc["key"]["root"]), doc["key"]["mode"])

    if not doc["notes"]:
        raise SchemaError("document has no notes", field_path="notes")

    chords = []
    for i, c in enumerate(doc["chords"]):
        try:
            if c.get("quality") == "rest" or c.get("root") == "rest":
                idx = REST_CHORD
            else:
                idx = ChordSymbol.parse(c["root"], c["quality"]).index
        except ChordError as exc:
            raise ChordError(f"chords/{i}: {exc}") from None
        chords.append((idx, c["start_sixteenth"], c["length_sixteenths"]))

    notes = sorted(enumerate(doc["notes"]), key=lambda n: n[1]["start_sixteenth"])
    # (pitch, start, length); gaps between notes become rests
    spans: list[tuple[int, int, int]] = []
    pos = 0
    for i, n in notes:
        start, length = n["start_sixteenth"], n["length_sixteenths"]
        if start < pos:
            raise SchemaError("overlapping notes (melody must be monophonic)", field_path=f"notes/{i}")
        if start > pos:
            spans.append((REST, pos, start - pos))
        p = n["pitch"]
        pitch = REST if p == "rest" else TIE if p == "tie" else int(p)
        if pitch == TIE and (not spans or start > pos or spans[-1][0] == REST):
            raise SchemaError("tie must directly follow a sounding note", field_path=f"notes/{i}")
        spans.append((pitch, start, length))
        pos = start + length

    try:
        timeline = ChordTimeline.from_chords(chords, end=pos, pickup=pickup)
    except MeterError:
        raise
    except CodecError as exc:
        raise SchemaError(str(exc), field_path="chords") from None

    events = []
    for pitch, start, length in spans:
        for j, (s, n) in enumerate(_split_at_bars(start, length, pickup)):
            p = pitch if (j == 0 or pitch == REST) else TIE
            events.append(MusicEvent(
                pitch=p, duration=n,
                current_chord=timeline.chord_at(s),
                next_chord=timeline.next_chord_at(s),
                bar_start=timeline.is_bar_line(s),
            ))
    validate_bars(events, pickup)
    sections = tuple(doc.get("sections", ()))
    if "section" in doc:
        sections = sections or (doc["section"],)
    meta = {k: doc[k] for k in ("song", "provenance") if k in doc}
    return LeadSheet(tuple(events), key=key, timeline=timeline, pickup=pickup,
                     title=doc.get("title", ""), sections=sections, meta=meta)


def parse_generated(source: str | dict) -> LeadSheet:
    """Rebuild a generated lead sheet event-for-event.

    Unlike :func:`parse_lead_sheet`, notes are not re-split at bar lines and the
    bar flags are the sampled ones stored in ``generation.bar_flags``, so bars of
    the wrong length survive for evaluation. Documents without stored flags fall
    back to :func:`parse_lead_sheet`.
    """
    doc = json.loads(source) if isinstance(source, str) else source
    flags = (doc.get("generation") or {}).get("bar_flags") if isinstance(doc, dict) else None
    if flags is None:
        return parse_lead_sheet(doc)
    errors = sorted(_validator().iter_errors(doc), key=lambda e: list(e.absolute_path))
    if errors:
        path = "/".join(str(p) for p in errors[0].absolute_path)
        raise SchemaError(errors[0].message, field_path=path or "<root>")
    notes = sorted(doc["notes"], key=lambda n: n["start_sixteenth"])
    if len(flags) != len(notes) or not notes:
        raise SchemaError("generation.bar_flags must have one entry per note", field_path="generation/bar_flags")
    pickup = int(doc.get("pickup_sixteenths", 0))
    chords = []
    for c in doc["chords"]:
        idx = REST_CHORD if "rest" in (c.get("root"), c.get("quality")) else ChordSymbol.parse(c["root"], c["quality"]).index
        chords.append((idx, c["start_sixteenth"], c["length_sixteenths"]))
    end = notes[-1]["start_sixteenth"] + notes[-1]["length_sixteenths"]
    timeline = ChordTimeline.from_chords(chords, end=end, pickup=pickup)
    events, pos = [], 0
    for i, (n, flag) in enumerate(zip(notes, flags)):
        if n["start_sixteenth"] != pos:
            raise SchemaError("generated notes must be contiguous", field_path=f"notes/{i}")
        p = n["pitch"]
        pitch = REST if p == "rest" else TIE if p == "tie" else int(p)
        d = n["length_sixteenths"]
        if d > N_DURATION:
            raise EncodingError("duration", d)
        events.append(MusicEvent(pitch, d, timeline.chord_at(pos), timeline.next_chord_at(pos), bool(flag)))
        pos += d
    meta = {k: doc[k] for k in ("song", "provenance", "generation") if k in doc}
    return LeadSheet(tuple(events), key=Key(pitch_class(doc["key"]["root"]), doc["key"]["mode"]),
                     timeline=timeline, pickup=pickup, title=doc.get("title", ""), meta=meta)


def to_document(ls: LeadSheet) -> dict:
    """Serialize to a leadsheet-v1 dict; every event becomes one explicit note."""
    notes, t = [], 0
    for e in ls.events:
        p = "rest" if e.is_rest else "tie" if e.is_tie else int(e.pitch)
        notes.append({"pitch": p, "start_sixteenth": t, "length_sixteenths": e.duration})
        t += e.duration
    timeline = ls.timeline or timeline_from_events(ls.events, ls.pickup)
    chords = []
    for idx, s, n in timeline.entries:
        c = ChordSymbol.from_index(idx)
        if c.is_rest:
            chords.append({"root": "rest", "quality": "rest", "start_sixteenth": s, "length_sixteenths": n})
        else:
            chords.append({"root": NOTE_NAMES[c.root], "quality": c.quality,
                           "start_sixteenth": s, "length_sixteenths": n})
    doc = {
        "schema": SCHEMA_VERSION,
        "title": ls.title,
        "key": {"root": NOTE_NAMES[ls.key.root], "mode": ls.key.mode},
        "meter": "4/4",
        "pickup_sixteenths": ls.pickup,
        "chords": chords,
        "notes": notes,
    }
    if ls.sections:
        doc["sections"] = list(ls.sections)
    doc.update({k: v for k, v in ls.meta.items() if k in ("song", "provenance", "generation")})
    return doc


def dumps(ls: LeadSheet) -> str:
    return json.dumps(to_document(ls), indent=1)


def timeline_from_events(events: Sequence[MusicEvent], pickup: int = 0) -> ChordTimeline:
    entries, t = [], 0
    for e in events:
        entries.append((e.current_chord, t, e.duration))
        t += e.duration
    return ChordTimeline(tuple(entries), pickup=pickup)


def transpose_to_c(ls: LeadSheet) -> LeadSheet:
    """Transpose so major keys land on C and minor keys on A (same key signature)."""
    target = 0 if ls.key.mode == "major" else 9
    shift = (target - ls.key.root) % 12
    if shift > 5:
        shift -= 12
    pitches = [e.pitch for e in ls.events if e.pitch < REST]
    if pitches:
        lo, hi = min(pitches), max(pitches)
        if lo + shift < 0:
            shift += 12
        elif hi + shift > 127:
            shift -= 12

    def move_chord(idx):
        return ChordSymbol.from_index(idx).transpose(shift).index

    events = [
        replace(e,
                pitch=e.pitch + shift if e.pitch < REST else e.pitch,
                current_chord=move_chord(e.current_chord),
                next_chord=move_chord(e.next_chord))
        for e in ls.events
    ]
    timeline = ls.timeline.transpose(shift) if ls.timeline is not None else None
    return replace(ls, events=tuple(events), key=Key(target, ls.key.mode), timeline=timeline)


def concatenate(sheets: Sequence[LeadSheet], title: str | None = None) -> LeadSheet:
    """Join sections end to end; a short final bar is padded with a rest first."""
    events: list[MusicEvent] = []
    entries: list[tuple[int, int, int]] = []
    offset = 0
    for i, ls in enumerate(sheets):
        evs = list(ls.events)
        tl = ls.timeline or timeline_from_events(evs, ls.pickup)
        if i > 0 and ls.pickup:
            # a mid-song pickup is absorbed into a full bar led by a rest
            pad = BAR_LENGTH - ls.pickup
            evs.insert(0, MusicEvent(REST, pad, REST_CHORD, tl.chord_at(0), True))
            evs[1] = replace(evs[1], bar_start=False)
            tl = ChordTimeline(((REST_CHORD, 0, pad),) + tuple((c, s + pad, n) for c, s, n in tl.entries))
        length = sum(e.duration for e in evs)
        last_bar = bar_lengths(evs)[-1]
        if i < len(sheets) - 1 and last_bar != BAR_LENGTH:
            pad = BAR_LENGTH - last_bar
            evs.append(MusicEvent(REST, pad, tl.chord_at(length - 1) if length else REST_CHORD,
                                  REST_CHORD, False))
        for c, s, n in tl.entries:
            if s < length:
                entries.append((c, s + offset, min(n, length - s)))
        if sum(e.duration for e in evs) > length:
            entries.append((entries[-1][0] if entries else REST_CHORD, offset + length,
                            sum(e.duration for e in evs) - length))
        events.extend(evs)
        offset += sum(e.duration for e in evs)
    timeline = ChordTimeline.from_chords(entries, end=offset, pickup=sheets[0].pickup)
    # next-chord labels must follow the merged timeline
    fixed, t = [], 0
    for e in events:
        fixed.append(replace(e, current_chord=timeline.chord_at(t), next_chord=timeline.next_chord_at(t)))
        t += e.duration
    first = sheets[0]
    return replace(first, events=tuple(fixed), timeline=timeline,
                   title=first.title if title is None else title,
                   sections=tuple(s for ls in sheets for s in ls.sections))
