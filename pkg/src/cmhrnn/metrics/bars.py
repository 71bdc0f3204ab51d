"""Successful-bar ratio over bar_start-delimited bars."""

from __future__ import annotations

from typing import Sequence

from ..codec import BAR_LENGTH, MusicEvent, bar_lengths


class UndefinedMetricError(ValueError):
    pass


def successful_bar_ratio(events: Sequence[MusicEvent], pickup: int = 0) -> float:
    """Fraction of complete bars lasting exactly 16 sixteenths.

    The last bar is still open and is not counted. With ``pickup`` > 0 the first
    bar is an anacrusis and is skipped as well.
    """
    bars = bar_lengths(events)[:-1]
    if pickup and bars:
        bars = bars[1:]
    if not bars:
        raise UndefinedMetricError("successful-bar ratio needs at least one complete bar")
    return sum(n == BAR_LENGTH for n in bars) / len(bars)
