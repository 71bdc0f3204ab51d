"""Hand-built lead-sheet documents shared by several test modules."""

AUTUMN_LEAVES = {
    "schema": "leadsheet-v1",
    "title": "autumn leaves (opening)",
    "key": {"root": "A", "mode": "minor"},
    "meter": "4/4",
    "chords": [
        {"root": "rest", "quality": "rest", "start_sixteenth": 0, "length_sixteenths": 16},
        {"root": "D", "quality": "m7", "start_sixteenth": 16, "length_sixteenths": 16},
        {"root": "G", "quality": "7", "start_sixteenth": 32, "length_sixteenths": 16},
    ],
    "notes": [
        {"pitch": 57, "start_sixteenth": 4, "length_sixteenths": 4},
        {"pitch": 59, "start_sixteenth": 8, "length_sixteenths": 4},
        {"pitch": 60, "start_sixteenth": 12, "length_sixteenths": 4},
        {"pitch": 65, "start_sixteenth": 16, "length_sixteenths": 16},
        {"pitch": "rest", "start_sixteenth": 32, "length_sixteenths": 4},
        {"pitch": 55, "start_sixteenth": 36, "length_sixteenths": 4},
        {"pitch": 57, "start_sixteenth": 40, "length_sixteenths": 4},
        {"pitch": 59, "start_sixteenth": 44, "length_sixteenths": 4},
    ],
}


def simple_doc(notes, chords=None, key=("C", "major"), meter="4/4", **extra):
    """Document from ``(pitch, start, length)`` triples; one C-major chord per bar by default."""
    end = max(s + n for _, s, n in notes)
    if chords is None:
        chords = [("C", "major", b, 16) for b in range(0, end, 16)]
    doc = {
        "title": extra.pop("title", "t"),
        "key": {"root": key[0], "mode": key[1]},
        "meter": meter,
        "chords": [{"root": r, "quality": q, "start_sixteenth": s, "length_sixteenths": n}
                   for r, q, s, n in chords],
        "notes": [{"pitch": p, "start_sixteenth": s, "length_sixteenths": n} for p, s, n in notes],
    }
    doc.update(extra)
    return doc
