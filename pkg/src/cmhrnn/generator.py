"""Chord-conditioned autoregressive generation with per-head temperatures."""

from __future__ import annotations

from dataclasses import asdict, dataclass
from typing import Sequence

import numpy as np

from . import nn
from .codec import (BAR_LENGTH, ChordTimeline, Key, LeadSheet, MusicEvent, acc_one_hot,
                    bar_lengths, encode_event)
from .hrnn import Decoder, TierConfig

DEFAULT_SEED_EVENTS = 16


class GenerationError(ValueError):
    pass


@dataclass(frozen=True)
class SamplingConfig:
    temp_pitch: float = 0.7
    temp_duration: float = 0.2
    temp_bar: float = 0.1
    seed: int = 0
    max_events: int = 2048

    def __post_init__(self):
        for name in ("temp_pitch", "temp_duration", "temp_bar"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be > 0, got {getattr(self, name)}")


def head_probabilities(logits, tau: float) -> np.ndarray:
    if not tau > 0:
        raise ValueError(f"temperature must be > 0, got {tau}")
    return nn.softmax(np.asarray(logits, dtype=float) / tau)


def sample_head(logits, tau: float, rng: np.random.Generator) -> int:
    """Draw an index from softmax(logits / tau)."""
    p = head_probabilities(logits, tau)
    c = np.cumsum(p)
    i = int(np.searchsorted(c, rng.random() * c[-1], side="right"))
    return min(i, len(p) - 1)


def metric_position(end: int, pickup: int = 0) -> int:
    """Position in the bar (1..16) reached at absolute time ``end`` (> 0)."""
    if pickup and end <= pickup:
        return BAR_LENGTH - pickup + end
    return (end - pickup - 1) % BAR_LENGTH + 1


@dataclass(frozen=True)
class BarCount:
    index: int
    sixteenths: int
    closed: bool

    @property
    def ok(self) -> bool:
        return self.sixteenths == BAR_LENGTH


def sbr_guard(events: Sequence[MusicEvent]) -> list[BarCount]:
    """Sixteenth count of every bar; the last bar is reported as open."""
    if not events:
        return []
    lengths = bar_lengths(events)
    return [BarCount(i, n, i < len(lengths) - 1) for i, n in enumerate(lengths)]


def generate(params, cfg: TierConfig, timeline: ChordTimeline, seed_events: Sequence[MusicEvent],
             sampling: SamplingConfig | None = None, key: Key = Key(), title: str = "") -> LeadSheet:
    """Continue ``seed_events`` until the chord timeline is exhausted.

    Chords of each new event are looked up at its onset on the absolute clock;
    its bar flag comes from the bar head. ``acc_t`` fed back to the network is
    recomputed from the clock, and disagreements between the sampled bar flag and
    the clock's bar grid are counted in ``meta["generation"]["bar_mismatches"]``.
    """
    sampling = sampling or SamplingConfig()
    seed_events = list(seed_events)
    if len(seed_events) < cfg.fs(1):
        raise GenerationError(f"seed has {len(seed_events)} events; the bottom tier needs {cfg.fs(1)}")
    clock = sum(e.duration for e in seed_events)
    if clock > timeline.end:
        raise GenerationError(f"chord timeline ({timeline.end} sixteenths) ends before the seed ({clock})")
    pickup = timeline.pickup
    rng = np.random.default_rng(sampling.seed)
    dec = Decoder(params, cfg)
    t = 0
    for e in seed_events:
        t += e.duration
        dec.push(encode_event(e), acc_one_hot([metric_position(t, pickup)])[0])

    events = list(seed_events)
    mismatches = 0
    while clock < timeline.end and len(events) < sampling.max_events:
        logits = dec.next_logits()
        pitch = sample_head(logits.pitch, sampling.temp_pitch, rng)
        duration = sample_head(logits.duration, sampling.temp_duration, rng) + 1
        bar_start = sample_head(logits.bar, sampling.temp_bar, rng) == 0
        e = MusicEvent(pitch, duration, timeline.chord_at(clock), timeline.next_chord_at(clock), bar_start)
        mismatches += bar_start != timeline.is_bar_line(clock)
        events.append(e)
        clock += duration
        dec.push(encode_event(e), acc_one_hot([metric_position(clock, pickup)])[0])

    meta = {"generation": {
        "seed_events": len(seed_events),
        "generated_events": len(events) - len(seed_events),
        "bar_mismatches": int(mismatches),
        "bar_flags": [bool(e.bar_start) for e in events],
        "sampling": asdict(sampling),
    }}
    return LeadSheet(tuple(events), key=key, timeline=timeline, pickup=pickup, title=title, meta=meta)
