"""SIATEC pattern discovery and greedy COSIATEC compression over (onset, pitch) point sets."""

from __future__ import annotations

from collections import defaultdict
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable

from ..codec import LeadSheet
from ..midi import melody_notes

Point = tuple[int, int]
ZERO = (0, 0)


def point_set(points: Iterable[Point]) -> frozenset[Point]:
    return frozenset((int(a), int(b)) for a, b in points)


def melody_to_point_set(ls: LeadSheet) -> frozenset[Point]:
    """One ``(onset, pitch)`` point per sounding note; tied continuations and rests add none."""
    return point_set((onset, pitch) for onset, _, pitch in melody_notes(ls))


def translate(points: Iterable[Point], v: Point) -> frozenset[Point]:
    return frozenset((p[0] + v[0], p[1] + v[1]) for p in points)


@dataclass(frozen=True, order=True)
class TEC:
    """A pattern and every vector that maps it into the source set (zero vector included)."""

    pattern: tuple[Point, ...]
    translators: tuple[Point, ...]

    def covered(self) -> frozenset[Point]:
        return frozenset((p[0] + v[0], p[1] + v[1]) for p in self.pattern for v in self.translators)

    @property
    def cost(self) -> int:
        return len(self.pattern) + len(self.translators) - 1

    def compression(self) -> Fraction:
        return Fraction(len(self.covered()), self.cost)


def translators(pattern: tuple[Point, ...], points: frozenset[Point]) -> tuple[Point, ...]:
    """All ``v`` with ``pattern + v`` inside ``points``, sorted."""
    p0 = pattern[0]
    out = []
    for d in points:
        v = (d[0] - p0[0], d[1] - p0[1])
        if all((p[0] + v[0], p[1] + v[1]) in points for p in pattern[1:]):
            out.append(v)
    return tuple(sorted(out))


def siatec(points: Iterable[Point]) -> list[TEC]:
    """TECs of every maximal translatable pattern, sorted.

    Differences between lexicographically ordered points are bucketed by vector;
    each bucket's origins form the maximal translatable pattern for that vector.
    A singleton set has no non-zero vectors and yields ``[TEC((p,), ((0, 0),))]``.
    """
    pts = sorted(point_set(points))
    if not pts:
        return []
    if len(pts) == 1:
        return [TEC((pts[0],), (ZERO,))]
    buckets: dict[Point, list[Point]] = defaultdict(list)
    for i, a in enumerate(pts):
        for b in pts[i + 1 :]:
            buckets[(b[0] - a[0], b[1] - a[1])].append(a)
    dataset = frozenset(pts)
    patterns = sorted({tuple(sorted(v)) for v in buckets.values()})
    tecs = [TEC(pat, translators(pat, dataset)) for pat in patterns]
    return sorted(tecs)


def _choice_key(tec: TEC):
    # best compression, then largest coverage, then smallest pattern, then lexicographic
    return (-tec.compression(), -len(tec.covered()), len(tec.pattern), tec.pattern, tec.translators)


def best_tec(candidates: Iterable[TEC]) -> TEC:
    return min(candidates, key=_choice_key)


def cosiatec(points: Iterable[Point]) -> list[TEC]:
    """Greedy cover: repeatedly take the best-compressing TEC of what remains."""
    remaining = point_set(points)
    out = []
    while remaining:
        cands = siatec(remaining)
        cands.append(TEC(tuple(sorted(remaining)), (ZERO,)))
        tec = best_tec(cands)
        out.append(tec)
        remaining = remaining - tec.covered()
    return out


def reconstruct(tecs: Iterable[TEC]) -> frozenset[Point]:
    out: set[Point] = set()
    for t in tecs:
        out |= t.covered()
    return frozenset(out)


def encoding_cost(tecs: Iterable[TEC]) -> int:
    return sum(t.cost for t in tecs)


def compression_ratio(points: Iterable[Point]) -> float:
    ps = point_set(points)
    if not ps:
        raise ValueError("compression ratio is undefined for an empty point set")
    return len(ps) / encoding_cost(cosiatec(ps))
