import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from facemotion.errors import LayoutOutOfImage
from facemotion.facegrid import (PUBLISHED_FEATURE_TOTALS, FaceAxes, GridSpec, build_layout, locate, situation,
                                 situation_table)

TABLE_TOTALS = (162, 630, 42, 252, 132, 330, 450, 480, 216, 168, 450, 84, 450, 30, 72, 288, 18, 54, 72, 132,
                288, 162, 132, 162, 54)
AXES = FaceAxes((100, 120), (180, 120), 220)


def test_table_has_25_rows_in_order():
    table = situation_table()
    assert len(table) == 25
    assert [s.situation for s in table] == list(range(1, 26))


def test_feature_totals_match_published_column():
    assert tuple(s.feature_count for s in situation_table()) == TABLE_TOTALS
    assert PUBLISHED_FEATURE_TOTALS == TABLE_TOTALS


def test_arithmetic_oracle_over_rows():
    for s in situation_table():
        assert 6 * (s.nx_top * s.ny_top + s.nx_mid * s.ny_mid + s.nx_bot * s.ny_bot) == s.feature_count


def test_row_19_and_21():
    s19, s21 = situation(19), situation(21)
    assert (s19.seg_width, s19.seg_height) == (30, 30)
    assert (s19.nx_top, s19.ny_top, s19.nx_mid, s19.ny_mid, s19.nx_bot, s19.ny_bot) == (2,) * 6
    assert s19.feature_count == 72
    assert (s21.seg_width, s21.seg_height, s21.nx_top) == (30, 30, 4)
    assert s21.feature_count == 288


def test_bad_situation_index():
    with pytest.raises(ValueError):
        situation(26)
    with pytest.raises(ValueError):
        situation(0)


def test_axes_invariants():
    with pytest.raises(ValueError):
        FaceAxes((180, 120), (100, 120), 220)
    with pytest.raises(ValueError):
        FaceAxes((100, 120), (180, 120), 110)


def test_situation_19_layout():
    lay = build_layout(AXES, situation(19), 280, 330)
    assert len(lay) == 24
    assert all(s.rect.width == 30 and s.rect.height == 30 and not s.truncated for s in lay.segments)
    assert [sum(1 for s in lay.segments if s.area == a) for a in range(1, 7)] == [4] * 6
    # area 1: left of the midline, above the eye axis, anchored at (140, 120)
    a1 = {s.index: s.rect for s in lay.segments if s.area == 1}
    assert tuple(a1[1]) == (110, 90, 30, 30)
    assert tuple(a1[2]) == (80, 90, 30, 30)
    assert tuple(a1[3]) == (110, 60, 30, 30)
    a6 = {s.index: s.rect for s in lay.segments if s.area == 6}
    assert tuple(a6[1]) == (140, 220, 30, 30)


def test_segments_disjoint_within_area():
    lay = build_layout(AXES, situation(1), 280, 330)
    for area in range(1, 7):
        seen = np.zeros((330, 280), dtype=int)
        for s in lay.segments:
            if s.area == area:
                r = s.rect
                seen[r.y:r.y1, r.x:r.x1] += 1
        assert seen.max() <= 1


def test_mirror_symmetry():
    w, h = 280, 330
    lay = build_layout(AXES, situation(19), w, h)
    # reflect about x_c = 140: pixel x maps to 2*140 - 1 - x, i.e. the image mirrored
    mirrored_axes = FaceAxes((w - 1 - 180 + 1, 120), (w - 1 - 100 + 1, 120), 220)
    mlay = build_layout(mirrored_axes, situation(19), w, h)
    seg = {(s.area, s.index): s.rect for s in lay.segments}
    mseg = {(s.area, s.index): s.rect for s in mlay.segments}
    for (area, k), r in seg.items():
        if area % 2 == 1:
            m = mseg[(area + 1, k)]
            assert (w - r.x1, r.y, r.width, r.height) == (m.x, m.y, m.width, m.height)


def test_truncation_at_top_border():
    axes = FaceAxes((100, 40), (180, 40), 220)
    lay = build_layout(axes, situation(19), 280, 330)
    top = [s for s in lay.segments if s.area == 1 and s.index == 3][0]
    assert top.truncated
    assert top.rect.y == 0 and top.rect.height == 10
    assert (1, 3) in lay.truncated


def test_layout_out_of_image():
    with pytest.raises(LayoutOutOfImage):
        build_layout(FaceAxes((400, 120), (480, 120), 220), situation(19), 280, 330)


def test_locate_conventions():
    lay = build_layout(AXES, situation(19), 280, 330)
    assert locate(lay, 110, 90) == (1, 1)        # top-left corner belongs to the segment
    assert locate(lay, 140, 90) == (2, 1)        # right edge of area 1 starts area 2
    assert locate(lay, 5, 300) is None           # cheek / outer region
    assert locate(lay, 139.5, 119.5) == (1, 1)


def test_locate_exhaustive_scan():
    lay = build_layout(AXES, situation(15), 280, 330)
    lab = lay.label_map()
    for k, s in enumerate(lay.segments):
        r = s.rect
        for y in range(r.y, r.y1):
            for x in range(r.x, r.x1):
                assert locate(lay, x, y) == (s.area, s.index)
                assert lab[y, x] == k


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 279), st.integers(0, 329))
def test_locate_matches_rect_membership(x, y):
    lay = build_layout(AXES, situation(6), 280, 330)
    hits = [(s.area, s.index) for s in lay.segments if s.rect.x <= x < s.rect.x1 and s.rect.y <= y < s.rect.y1]
    assert len(hits) <= 1
    assert locate(lay, x, y) == (hits[0] if hits else None)


def test_layout_deterministic_and_json():
    a = build_layout(AXES, situation(7), 280, 330)
    b = build_layout(AXES, situation(7), 280, 330)
    assert a.to_json() == b.to_json()
    assert a.to_dict()["anchors"] == {"eye_y": 120, "mouth_y": 220, "mid_x": 140}


def test_gridspec_roundtrip_and_validation():
    g = situation(9)
    assert GridSpec.from_dict(g.to_dict()) == g
    with pytest.raises(ValueError):
        GridSpec(0, 5, 1, 1, 1, 1, 1, 1)
    with pytest.raises(ValueError):
        GridSpec(5, 5, 1, 0, 1, 1, 1, 1)
