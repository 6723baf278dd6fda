import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from radimpute.survey import (MAR, MNAR, MNAR_FILL, OBSERVED, RadioMap, SurveyRecord, ValidationError,
                              amend_mask, check_mask, observed_mask, read_mask, read_radio_map, read_survey,
                              validate_radio_map, write_mask, write_radio_map, write_survey)

from conftest import EXAMPLE_FP, EXAMPLE_RP, EXAMPLE_T


def example_map():
    return RadioMap(EXAMPLE_FP, EXAMPLE_RP, EXAMPLE_T)


def test_example_map_is_valid():
    assert validate_radio_map(example_map()) == []


def test_out_of_range_rssi_is_one_violation():
    fp = EXAMPLE_FP.copy()
    fp[0, 0] = -101
    v = validate_radio_map(RadioMap(fp, EXAMPLE_RP, EXAMPLE_T))
    assert len(v) == 1
    assert v[0].index == 0 and v[0].field.startswith("fp")


def test_minus_100_is_legal_after_filling():
    fp = np.where(np.isnan(EXAMPLE_FP), MNAR_FILL, EXAMPLE_FP)
    assert validate_radio_map(RadioMap(fp, EXAMPLE_RP, EXAMPLE_T)) == []


def test_equal_times_on_one_path_is_one_violation():
    t = EXAMPLE_T.copy()
    t[2] = t[1]
    v = validate_radio_map(RadioMap(EXAMPLE_FP, EXAMPLE_RP, t))
    assert len(v) == 1 and v[0].index == 2


def test_equal_times_on_different_paths_is_fine():
    t = EXAMPLE_T.copy()
    t[2] = t[1]
    paths = np.array([0, 0, 1, 1, 1])
    assert validate_radio_map(RadioMap(EXAMPLE_FP, EXAMPLE_RP, t, paths)) == []


@pytest.mark.parametrize("kwargs", [
    dict(time=0, kind="RP"),
    dict(time=0, kind="RSSI", rssi={}),
    dict(time=0, kind="RSSI", rssi={0: -50}, rp=(1, 1)),
    dict(time=0, kind="XY", rp=(1, 1)),
])
def test_record_kind_invariants(kwargs):
    with pytest.raises(ValidationError):
        SurveyRecord(**kwargs)


def test_observed_mask_marks_only_nulls():
    m = observed_mask(example_map())
    assert m.tolist()[0] == [1, 1, 1, 0, 0]
    assert ((m != OBSERVED) == np.isnan(EXAMPLE_FP)).all()


def test_amend_fills_mnar_and_marks_observed():
    rmap = example_map()
    mask = observed_mask(rmap).astype(np.int8)
    mask[0, 3] = MNAR
    filled, amended = amend_mask(rmap, mask)
    assert filled.fingerprints[0, 3] == MNAR_FILL
    assert set(np.unique(amended)) <= {MAR, OBSERVED}
    assert amended[0, 3] == OBSERVED


def test_check_mask_rejects_mismatch():
    rmap = example_map()
    mask = observed_mask(rmap)
    mask[0, 0] = MAR  # observed cell labeled missing
    with pytest.raises(ValidationError):
        check_mask(rmap, mask)


def test_radio_map_is_read_only():
    rmap = example_map()
    with pytest.raises(ValueError):
        rmap.fingerprints[0, 0] = 1


def test_survey_round_trip(tmp_path, survey_example):
    p = tmp_path / "s.jsonl"
    write_survey(survey_example, p)
    assert read_survey(p) == survey_example


def test_mask_round_trip(tmp_path):
    m = np.array([[1, 0, -1], [-1, -1, 1]], dtype=np.int8)
    write_mask(m, tmp_path / "m.csv")
    assert (read_mask(tmp_path / "m.csv") == m).all()
    assert (tmp_path / "m.csv").read_text() == "1,0,-1\n-1,-1,1\n"


rssi_cell = st.one_of(st.none(), st.integers(-99, 0))


@st.composite
def radio_maps(draw):
    n = draw(st.integers(1, 8))
    d = draw(st.integers(1, 5))
    fp = np.array([[np.nan if v is None else v for v in draw(st.lists(rssi_cell, min_size=d, max_size=d))]
                   for _ in range(n)], dtype=float)
    rps = np.array([draw(st.one_of(st.just((np.nan, np.nan)),
                                   st.tuples(st.floats(-50, 50, allow_nan=False), st.floats(-50, 50, allow_nan=False))))
                    for _ in range(n)], dtype=float)
    gaps = draw(st.lists(st.floats(0.01, 10), min_size=n, max_size=n))
    paths = np.array(draw(st.lists(st.integers(0, 2), min_size=n, max_size=n)))
    return RadioMap(fp, rps, np.cumsum(gaps), paths)


@settings(max_examples=60, deadline=None)
@given(radio_maps())
def test_radio_map_round_trip(tmp_path_factory, rmap):
    p = tmp_path_factory.mktemp("rt") / "map.jsonl"
    write_radio_map(rmap, p)
    assert read_radio_map(p) == rmap


@settings(max_examples=60, deadline=None)
@given(radio_maps())
def test_mask_marks_exactly_nulls(rmap):
    m = observed_mask(rmap)
    assert ((m == OBSERVED) == ~np.isnan(rmap.fingerprints)).all()
