"""Per-piece evaluation rows (SBR, CPR, CD, TS, CM) and corpus summary statistics."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from ..codec import LeadSheet
from .bars import UndefinedMetricError, successful_bar_ratio
from .cosiatec import compression_ratio, melody_to_point_set
from .tension import DEFAULT_WINDOW, tension_profile

COLUMNS = ("SBR", "CPR", "CD", "TS", "CM")


@dataclass(frozen=True)
class PieceRow:
    name: str
    values: dict[str, float]  # NaN where a measure is undefined for the piece


def _safe(fn):
    try:
        return fn()
    except (UndefinedMetricError, ValueError):
        return math.nan


def evaluate_piece(ls: LeadSheet, name: str = "", window: int = DEFAULT_WINDOW) -> PieceRow:
    vals = {
        "SBR": _safe(lambda: successful_bar_ratio(ls.events, ls.pickup)),
        "CPR": _safe(lambda: compression_ratio(melody_to_point_set(ls))),
    }
    try:
        tp = tension_profile(ls, window=window).means()
    except ValueError:
        tp = {"CD": math.nan, "TS": math.nan, "CM": math.nan}
    vals.update(tp)
    return PieceRow(name or ls.title, vals)


@dataclass(frozen=True)
class EvaluationReport:
    rows: tuple[PieceRow, ...]
    window: int

    def summary(self) -> dict[str, dict[str, float | int]]:
        out = {}
        for c in COLUMNS:
            v = np.array([r.values[c] for r in self.rows], dtype=float)
            v = v[~np.isnan(v)]
            out[c] = {"mean": float(v.mean()) if len(v) else math.nan,
                      "std": float(v.std()) if len(v) else math.nan, "n": int(len(v))}
        return out

    def to_tsv(self) -> str:
        def fmt(x):
            return "nan" if math.isnan(x) else f"{x:.4f}"

        lines = ["\t".join(("piece",) + COLUMNS)]
        for r in self.rows:
            lines.append("\t".join([r.name] + [fmt(r.values[c]) for c in COLUMNS]))
        s = self.summary()
        lines.append("\t".join(["mean"] + [fmt(s[c]["mean"]) for c in COLUMNS]))
        lines.append("\t".join(["std"] + [fmt(s[c]["std"]) for c in COLUMNS]))
        return "\n".join(lines) + "\n"


def evaluate_corpus(pieces: Sequence[tuple[str, LeadSheet]], window: int = DEFAULT_WINDOW) -> EvaluationReport:
    if not pieces:
        raise ValueError("nothing to evaluate")
    return EvaluationReport(tuple(evaluate_piece(ls, name, window) for name, ls in pieces), window)
