"""Desk-scale synthetic corpus: diatonic melodies over a I-vi-ii-V loop in C major."""

from __future__ import annotations

import numpy as np

from .codec import (REST, ChordSymbol, ChordTimeline, Key, LeadSheet, MusicEvent)

PROGRESSION = (
    ChordSymbol(0, "major"),
    ChordSymbol(9, "minor"),
    ChordSymbol(2, "minor"),
    ChordSymbol(7, "dominant7"),
)

RHYTHMS = (
    (4, 4, 4, 4),
    (8, 4, 4),
    (4, 4, 8),
    (2, 2, 4, 8),
    (6, 2, 4, 4),
    (4, 2, 2, 4, 4),
    (8, 8),
    (12, 4),
    (3, 1, 4, 4, 4),
    (16,),
)

C_MAJOR = (0, 2, 4, 5, 7, 9, 11)
LOW, HIGH = 60, 79


def _scale_pitches():
    return [p for p in range(LOW, HIGH + 1) if p % 12 in C_MAJOR]


def _nearest(pitches, target):
    return min(pitches, key=lambda p: (abs(p - target), p))


def make_fragment(rng: np.random.Generator, n_bars: int = 8, title: str = "") -> LeadSheet:
    """One fragment; bars 5-6 restate bars 1-2 (the loop puts the same chords under them)."""
    scale = _scale_pitches()
    chords = [PROGRESSION[b % 4] for b in range(n_bars)]
    pitch = _nearest(scale, 67)
    bars: list[list[MusicEvent]] = []
    for b in range(n_bars):
        if 4 <= b < 6:
            bars.append(list(bars[b - 4]))
            continue
        chord = chords[b]
        nxt = chords[b + 1] if b + 1 < n_bars else ChordSymbol.rest()
        triad = (0, 3, 7) if chord.quality == "minor" else (0, 4, 7)
        tones = [p for p in range(LOW, HIGH + 1) if (p - chord.root) % 12 in triad]
        rhythm = RHYTHMS[int(rng.integers(0, len(RHYTHMS)))]
        bar = []
        for j, dur in enumerate(rhythm):
            if j == 0:
                p = _nearest(tones, pitch + int(rng.integers(-4, 5)))
            else:
                step = int(rng.choice([-2, -1, 1, 2]))
                idx = min(max(scale.index(_nearest(scale, pitch)) + step, 0), len(scale) - 1)
                p = scale[idx]
            if j == len(rhythm) - 1 and len(rhythm) > 2 and rng.random() < 0.15:
                bar.append(MusicEvent(REST, dur, chord.index, nxt.index, False))
            else:
                pitch = p
                bar.append(MusicEvent(p, dur, chord.index, nxt.index, j == 0))
        bars.append(bar)
    events = [e for bar in bars for e in bar]
    timeline = ChordTimeline(tuple((c.index, 16 * i, 16) for i, c in enumerate(chords)))
    return LeadSheet(tuple(events), key=Key(0, "major"), timeline=timeline, title=title)


def synthetic_corpus(n: int, seed: int = 0, n_bars: int = 8) -> list[LeadSheet]:
    rng = np.random.default_rng(seed)
    return [make_fragment(rng, n_bars, title=f"synthetic-{seed}-{i:04d}") for i in range(n)]
