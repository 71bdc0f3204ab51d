import math
import random

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from cmhrnn.codec import ChordSymbol, Key, MusicEvent, parse_lead_sheet
from cmhrnn.metrics import (HEIGHT, TEC, UndefinedMetricError, center_of_effect, chord_point, cloud_diameter,
                            cloud_momentum, cloud_points, compression_ratio, cosiatec, encoding_cost,
                            evaluate_corpus, key_point, line_of_fifths, melody_to_point_set, pitch_point,
                            reconstruct, siatec, spiral_position, successful_bar_ratio, tensile_strain,
                            tension_profile, translate)

from .leadsheets import simple_doc
from .oracles import brute_compression_ratio, brute_mtps, brute_translators, helix

point_sets = st.frozensets(st.tuples(st.integers(0, 7), st.integers(0, 7)), min_size=1, max_size=9)


# --- successful-bar ratio ----------------------------------------------------------


def _bars(lengths):
    return [MusicEvent(60, n, 0, 0, True) for n in lengths]


def test_sbr_examples():
    assert successful_bar_ratio(_bars([16, 16, 16, 16, 8])) == 1.0
    assert successful_bar_ratio(_bars([16, 16, 12, 16, 16])) == 0.75


def test_sbr_counts_inter_bar_durations():
    evs = [MusicEvent(60, 8, 0, 0, True), MusicEvent(60, 8, 0, 0, False), MusicEvent(60, 4, 0, 0, True),
           MusicEvent(60, 16, 0, 0, False), MusicEvent(60, 4, 0, 0, True)]
    assert successful_bar_ratio(evs) == 0.5


def test_sbr_needs_a_complete_bar():
    with pytest.raises(UndefinedMetricError):
        successful_bar_ratio(_bars([16]))


def test_sbr_skips_pickup_bar():
    assert successful_bar_ratio(_bars([4, 16, 16, 2]), pickup=4) == 1.0


# --- point sets -------------------------------------------------------------------------


def test_point_set_examples():
    ls = parse_lead_sheet(simple_doc([(60, 0, 4), (62, 4, 4), ("rest", 8, 8)]))
    assert melody_to_point_set(ls) == {(0, 60), (4, 62)}
    assert melody_to_point_set(parse_lead_sheet(simple_doc([("rest", 0, 16)]))) == frozenset()
    tied = parse_lead_sheet(simple_doc([(60, 0, 32)]))
    assert tied.events[1].pitch == 129
    assert melody_to_point_set(tied) == {(0, 60)}


# --- SIATEC / COSIATEC ----------------------------------------------------------------


def test_siatec_four_point_example():
    tecs = siatec({(0, 0), (1, 0), (4, 0), (5, 0)})
    assert TEC(((0, 0), (1, 0)), ((0, 0), (4, 0))) in tecs
    assert tecs == sorted(tecs)


def test_siatec_singleton():
    assert siatec({(3, 4)}) == [TEC(((3, 4),), ((0, 0),))]


def _shape(pattern):
    x0, y0 = min(pattern)
    return tuple(sorted((x - x0, y - y0) for x, y in pattern))


@given(point_sets)
def test_siatec_tecs_are_valid_and_maximal(ps):
    for tec in siatec(ps):
        assert tec.covered() <= ps
        assert (0, 0) in tec.translators
        assert list(tec.translators) == brute_translators(tec.pattern, ps)
    if len(ps) > 1:
        # MTP(-v) is MTP(v) shifted by v, so the pattern families agree up to translation
        assert {_shape(t.pattern) for t in siatec(ps)} == {_shape(p) for p in brute_mtps(ps)}


@given(point_sets, st.integers(-20, 20), st.integers(-20, 20))
def test_siatec_translation_symmetry(ps, dx, dy):
    shifted = siatec(translate(ps, (dx, dy)))
    expected = sorted(TEC(tuple((x + dx, y + dy) for x, y in t.pattern), t.translators) for t in siatec(ps))
    assert shifted == expected


def _triple_repeat():
    pat = [(0, 60), (1, 62), (2, 64), (3, 65)]
    return {(x + o, y) for o in (0, 4, 8) for x, y in pat}


def test_triple_repeat_case():
    ps = _triple_repeat()
    tecs = cosiatec(ps)
    assert len(tecs) == 1 and encoding_cost(tecs) == 6
    assert compression_ratio(ps) == 2.0 == brute_compression_ratio(ps)


def test_singleton_cost_and_ratio():
    assert encoding_cost(cosiatec({(0, 0)})) == 1
    assert compression_ratio({(0, 0)}) == 1.0


def test_empty_set_ratio_undefined():
    with pytest.raises(ValueError):
        compression_ratio(set())


def test_lossless_on_random_sets():
    rng = random.Random(0)
    for _ in range(200):
        ps = {(rng.randrange(10), rng.randrange(10)) for _ in range(rng.randint(1, 12))}
        assert reconstruct(cosiatec(ps)) == ps


@given(point_sets)
def test_ratio_at_least_one_and_translation_invariant(ps):
    r = compression_ratio(ps)
    assert r >= 1.0
    assert compression_ratio(translate(ps, (13, -7))) == r


@given(point_sets)
def test_covers_are_disjoint_progress(ps):
    remaining = set(ps)
    for tec in cosiatec(ps):
        cov = tec.covered()
        assert cov <= remaining and cov
        remaining -= cov
    assert not remaining


# --- spiral array -------------------------------------------------------------------------


def test_helix_examples():
    assert np.allclose(spiral_position(0).array, [0, 1, 0], atol=1e-15)
    e = spiral_position(4).array
    assert np.allclose(e, [0, 1, 4 * HEIGHT], atol=1e-12)
    assert math.isclose(HEIGHT, math.sqrt(2 / 15))


def test_line_of_fifths_spelling():
    assert [line_of_fifths(pc) for pc in (0, 7, 2, 5, 10, 6)] == [0, 1, 2, -1, -2, 6]
    # in D major, C# is spelled as the leading tone (k = 7), not as Db (k = -5)
    assert line_of_fifths(1, key_root=2) == 7


def test_c_major_chord_point():
    expected = 0.6 * helix(0) + 0.3 * helix(1) + 0.1 * helix(4)
    assert np.allclose(spiral_position(ChordSymbol(0, "major")).array, expected)
    assert np.allclose(chord_point(0, "dominant7"), expected)


def test_minor_and_diminished_chords():
    assert np.allclose(chord_point(3, "minor"), 0.6 * helix(3) + 0.3 * helix(4) + 0.1 * helix(0))
    assert np.allclose(chord_point(5, "diminished"), 0.6 * helix(5) + 0.3 * helix(-1) + 0.1 * helix(2))
    with pytest.raises(ValueError):
        chord_point(0, "augmented")


def test_key_points():
    cmaj = 0.6 * chord_point(0, "major") + 0.3 * chord_point(1, "major") + 0.1 * chord_point(-1, "major")
    assert np.allclose(spiral_position(Key(0, "major")).array, cmaj)
    amin = 0.6 * chord_point(3, "minor") + 0.3 * chord_point(4, "major") + 0.1 * chord_point(2, "minor")
    assert np.allclose(key_point(3, "minor"), amin)


# --- tension -------------------------------------------------------------------------------


def test_single_pitch_cloud_diameter_is_zero():
    assert cloud_diameter(cloud_points([60], Key())) == 0.0
    assert cloud_diameter(cloud_points([60, 72, 48], Key())) == 0.0


def test_identical_clouds_have_zero_momentum():
    pts = cloud_points([60, 64, 67], Key())
    ce = center_of_effect(pts, [1, 2, 1])
    assert cloud_momentum(ce, center_of_effect(pts.copy(), [1, 2, 1])) == 0.0


def test_strain_ordering_in_c():
    k = Key(0, "major")
    consonant = tensile_strain(center_of_effect(cloud_points([60, 64, 67], k), [1, 1, 1]), k)
    clash = tensile_strain(center_of_effect(cloud_points([61, 62, 68], k), [1, 1, 1]), k)
    assert consonant < clash


@given(st.lists(st.integers(48, 84), min_size=1, max_size=6), st.integers(0, 11))
def test_strain_transposition_invariance(pitches, shift):
    k0, k1 = Key(0, "major"), Key(shift, "major")
    w = list(range(1, len(pitches) + 1))
    a = tensile_strain(center_of_effect(cloud_points(pitches, k0), w), k0)
    b = tensile_strain(center_of_effect(cloud_points([p + shift for p in pitches], k1), w), k1)
    assert abs(a - b) < 1e-9


@given(st.lists(st.integers(48, 84), min_size=1, max_size=6), st.randoms())
def test_diameter_permutation_and_zero_iff_single_class(pitches, rnd):
    shuffled = list(pitches)
    rnd.shuffle(shuffled)
    k = Key()
    d = cloud_diameter(cloud_points(pitches, k))
    assert d == cloud_diameter(cloud_points(shuffled, k))
    assert (d == 0) == (len({p % 12 for p in pitches}) == 1)


@given(st.lists(st.integers(48, 84), min_size=1, max_size=4), st.lists(st.integers(48, 84), min_size=1, max_size=4))
def test_momentum_symmetric(a, b):
    k = Key()
    ca = center_of_effect(cloud_points(a, k), [1] * len(a))
    cb = center_of_effect(cloud_points(b, k), [1] * len(b))
    assert cloud_momentum(ca, cb) == cloud_momentum(cb, ca) >= 0


def test_tension_profile_windows_and_carry_forward():
    ls = parse_lead_sheet(simple_doc([("rest", 0, 4), (60, 4, 2), (64, 6, 2), ("rest", 8, 4), (67, 12, 4)]))
    tp = tension_profile(ls, window=4)
    assert tp.empty == (True, False, True, False)
    assert len(tp.cd) == len(tp.ts) == 4 and len(tp.cm) == 3
    assert tp.cd[0] == tp.cd[1] and tp.ts[2] == tp.ts[1]
    assert tp.cm[0] == 0.0 and tp.cm[1] == 0.0 and tp.cm[2] > 0
    assert all(v >= 0 for v in tp.cd + tp.ts + tp.cm)


def test_center_of_effect_is_duration_weighted():
    ls = parse_lead_sheet(simple_doc([(60, 0, 3), (67, 3, 1), ("rest", 4, 12)]))
    tp = tension_profile(ls, window=4)
    k = Key()
    ce = (3 * pitch_point(0) + pitch_point(1)) / 4
    assert math.isclose(tp.ts[0], tensile_strain(ce, k), rel_tol=1e-12)


def test_tension_profile_errors():
    ls = parse_lead_sheet(simple_doc([(60, 0, 16)]))
    with pytest.raises(ValueError):
        tension_profile(ls, window=0)
    with pytest.raises(ValueError):
        tension_profile(parse_lead_sheet(simple_doc([("rest", 0, 16)])))


# --- report -------------------------------------------------------------------------------


def test_report_single_piece_and_oracle_cpr():
    pat = [(0, 60, 1), (1, 62, 1), (2, 64, 1), (3, 65, 1)]
    notes = [(p, s + o, n) for o in (0, 4, 8) for p, s, n in [(q, a, b) for a, q, b in pat]]
    notes.append(("rest", 12, 4))
    ls = parse_lead_sheet(simple_doc(notes))
    report = evaluate_corpus([("crafted", ls)])
    assert len(report.rows) == 1
    assert report.rows[0].values["CPR"] == brute_compression_ratio(melody_to_point_set(ls)) == 2.0
    tsv = report.to_tsv().splitlines()
    assert tsv[0].split("\t") == ["piece", "SBR", "CPR", "CD", "TS", "CM"]
    assert tsv[1].startswith("crafted") and tsv[-2].startswith("mean") and tsv[-1].startswith("std")
    assert math.isnan(report.rows[0].values["SBR"])  # one open bar only


def test_report_empty_raises():
    with pytest.raises(ValueError):
        evaluate_corpus([])
