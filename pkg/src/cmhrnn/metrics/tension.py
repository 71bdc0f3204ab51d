"""Spiral-array embedding and windowed tonal tension (cloud diameter, tensile strain, cloud momentum)."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..codec import ChordSymbol, Key, LeadSheet
from ..midi import melody_notes

RADIUS = 1.0
HEIGHT = math.sqrt(2.0 / 15.0)
CHORD_WEIGHTS = (0.6, 0.3, 0.1)  # root, fifth, third
KEY_WEIGHTS = (0.6, 0.3, 0.1)  # tonic, dominant, subdominant
DEFAULT_WINDOW = 4


@dataclass(frozen=True)
class SpiralPoint:
    x: float
    y: float
    z: float

    @property
    def array(self) -> np.ndarray:
        return np.array([self.x, self.y, self.z])

    @classmethod
    def of(cls, v) -> "SpiralPoint":
        return cls(float(v[0]), float(v[1]), float(v[2]))


def _fifths_offset(interval: int) -> int:
    """Steps along the line of fifths for an interval, folded into [-5, 6]."""
    k = (7 * interval) % 12
    return k - 12 if k > 6 else k


def line_of_fifths(pc: int, key_root: int = 0) -> int:
    """Line-of-fifths index of ``pc`` spelled relative to ``key_root`` (C = 0, G = 1, F = -1)."""
    return _fifths_offset(key_root) + _fifths_offset(pc - key_root)


def pitch_point(k: int) -> np.ndarray:
    return np.array([RADIUS * math.sin(k * math.pi / 2), RADIUS * math.cos(k * math.pi / 2), k * HEIGHT])


def _weighted(points, weights) -> np.ndarray:
    return sum(w * p for w, p in zip(weights, points))


def chord_point(k: int, quality: str) -> np.ndarray:
    """Chord centre from its root's line-of-fifths index; sevenths use their triad."""
    if quality in ("major", "dominant7"):
        return _weighted((pitch_point(k), pitch_point(k + 1), pitch_point(k + 4)), CHORD_WEIGHTS)
    if quality == "minor":
        return _weighted((pitch_point(k), pitch_point(k + 1), pitch_point(k - 3)), CHORD_WEIGHTS)
    if quality == "diminished":
        return _weighted((pitch_point(k), pitch_point(k - 6), pitch_point(k - 3)), CHORD_WEIGHTS)
    raise ValueError(f"unknown chord quality {quality!r}")


def key_point(k: int, mode: str) -> np.ndarray:
    if mode == "major":
        chords = (chord_point(k, "major"), chord_point(k + 1, "major"), chord_point(k - 1, "major"))
    elif mode == "minor":
        chords = (chord_point(k, "minor"), chord_point(k + 1, "major"), chord_point(k - 1, "minor"))
    else:
        raise ValueError(f"unknown key mode {mode!r}")
    return _weighted(chords, KEY_WEIGHTS)


def spiral_position(obj, key: Key | None = None) -> SpiralPoint:
    """Spiral point of a pitch class (int), a ChordSymbol or a Key.

    Pitch classes and chord roots are spelled relative to ``key`` (C major if omitted).
    """
    ref = key.root if key is not None else 0
    if isinstance(obj, Key):
        return SpiralPoint.of(key_point(line_of_fifths(obj.root, 0), obj.mode))
    if isinstance(obj, ChordSymbol):
        if obj.is_rest:
            raise ValueError("the rest chord has no spiral position")
        return SpiralPoint.of(chord_point(line_of_fifths(obj.root, ref), obj.quality))
    return SpiralPoint.of(pitch_point(line_of_fifths(int(obj) % 12, ref)))


# --- clouds ---------------------------------------------------------------


def cloud_points(pitches, key: Key) -> np.ndarray:
    ref = line_of_fifths(key.root, 0)
    return np.array([pitch_point(ref + _fifths_offset(p % 12 - key.root)) for p in pitches]).reshape(-1, 3)


def cloud_diameter(points: np.ndarray) -> float:
    pts = np.asarray(points, dtype=float)
    if len(pts) < 2:
        return 0.0
    d = pts[:, None, :] - pts[None, :, :]
    return float(np.sqrt((d * d).sum(-1)).max())


def center_of_effect(points: np.ndarray, weights) -> np.ndarray:
    w = np.asarray(weights, dtype=float)
    if w.sum() <= 0:
        raise ValueError("center of effect needs positive total weight")
    return (np.asarray(points, dtype=float) * w[:, None]).sum(0) / w.sum()


def tensile_strain(ce: np.ndarray, key: Key) -> float:
    return float(np.linalg.norm(ce - key_point(line_of_fifths(key.root, 0), key.mode)))


def cloud_momentum(ce_a: np.ndarray, ce_b: np.ndarray) -> float:
    return float(np.linalg.norm(np.asarray(ce_a) - np.asarray(ce_b)))


@dataclass(frozen=True)
class TensionProfile:
    window: int
    cd: tuple[float, ...]
    ts: tuple[float, ...]
    cm: tuple[float, ...]
    empty: tuple[bool, ...]

    def means(self) -> dict[str, float]:
        return {"CD": float(np.mean(self.cd)), "TS": float(np.mean(self.ts)),
                "CM": float(np.mean(self.cm)) if self.cm else 0.0}


def tension_profile(ls: LeadSheet, key: Key | None = None, window: int = DEFAULT_WINDOW) -> TensionProfile:
    """Tension series over consecutive windows of ``window`` sixteenths.

    A cloud holds every note sounding in the window; its centre of effect is
    weighted by how long each note overlaps the window. Windows with no sounding
    note repeat the previous window's values (or the first non-empty one's, at
    the start) and are flagged in ``empty``.
    """
    if window < 1:
        raise ValueError("window must be at least one sixteenth")
    key = key or ls.key
    notes = melody_notes(ls)
    if not notes:
        raise ValueError("melody has no sounding notes")
    n_win = -(-ls.total_duration // window)
    cds: list[float | None] = []
    ces: list[np.ndarray | None] = []
    for w in range(n_win):
        lo, hi = w * window, (w + 1) * window
        pitches, weights = [], []
        for onset, length, pitch in notes:
            overlap = min(hi, onset + length) - max(lo, onset)
            if overlap > 0:
                pitches.append(pitch)
                weights.append(overlap)
        if pitches:
            pts = cloud_points(pitches, key)
            cds.append(cloud_diameter(pts))
            ces.append(center_of_effect(pts, weights))
        else:
            cds.append(None)
            ces.append(None)
    empty = tuple(c is None for c in cds)
    first = empty.index(False)
    prev_cd, prev_ce = cds[first], ces[first]
    for i in range(n_win):
        if cds[i] is None:
            cds[i], ces[i] = prev_cd, prev_ce
        prev_cd, prev_ce = cds[i], ces[i]
    ts = tuple(tensile_strain(c, key) for c in ces)
    cm = tuple(cloud_momentum(ces[i - 1], ces[i]) for i in range(1, n_win))
    return TensionProfile(window, tuple(cds), ts, cm, empty)
