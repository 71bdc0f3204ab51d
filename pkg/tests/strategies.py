"""Hypothesis strategies for codec objects."""

from hypothesis import strategies as st

from cmhrnn.codec import N_CHORD, N_DURATION, N_PITCH, MusicEvent

events = st.builds(
    MusicEvent,
    pitch=st.integers(0, N_PITCH - 1),
    duration=st.integers(1, N_DURATION),
    current_chord=st.integers(0, N_CHORD - 1),
    next_chord=st.integers(0, N_CHORD - 1),
    bar_start=st.booleans(),
)


@st.composite
def bar_aligned_melodies(draw, max_bars=4):
    """(pitch, start, length) note triples filling whole 4/4 bars; sounding pitches only."""
    n_bars = draw(st.integers(1, max_bars))
    notes, t = [], 0
    end = 16 * n_bars
    while t < end:
        n = draw(st.integers(1, min(16, end - t)))
        p = draw(st.one_of(st.integers(40, 90), st.just("rest")))
        notes.append((p, t, n))
        t += n
    return notes
