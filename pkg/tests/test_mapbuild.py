import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from radimpute.mapbuild import build_radio_map, merge_rp_rssi, merge_rssi_records
from radimpute.survey import RadioMap, SurveyRecord, ValidationError

from conftest import EXAMPLE_FP, EXAMPLE_RP, EXAMPLE_T


def test_survey_example_builds_expected_map(survey_example):
    rmap = build_radio_map(survey_example, 1.0)
    assert rmap == RadioMap(EXAMPLE_FP, EXAMPLE_RP, EXAMPLE_T)


def test_step_one_merges_gap_of_exactly_epsilon(survey_example):
    merged = merge_rssi_records(survey_example, 1.0)
    rssi = [r for r in merged if r.kind == "RSSI"]
    assert [r.time for r in rssi] == [1, 3, 8, 12]
    assert rssi[-1].rssi == {0: -74, 1: -77, 4: -81}


def test_single_rssi_record_unchanged():
    t = [SurveyRecord(0, "RSSI", rssi={0: -50})]
    assert merge_rssi_records(t, 1.0) == t


def test_cascading_merge_keeps_earliest_time():
    t = [SurveyRecord(0, "RSSI", rssi={0: -50}), SurveyRecord(0.5, "RSSI", rssi={1: -60}),
         SurveyRecord(1.0, "RSSI", rssi={2: -70})]
    out = merge_rssi_records(t, 1.0)
    assert len(out) == 1
    assert out[0].time == 0 and out[0].rssi == {0: -50, 1: -60, 2: -70}


def test_only_rp_records():
    t = [SurveyRecord(0, "RP", rp=(0, 0)), SurveyRecord(5, "RP", rp=(1, 1))]
    rmap = merge_rp_rssi(t, 1.0, n_aps=3)
    assert np.isnan(rmap.fingerprints).all()
    assert rmap.rp_observed.all()


def test_rp_and_rssi_beyond_epsilon_stay_apart():
    t = [SurveyRecord(5, "RP", rp=(0, 0)), SurveyRecord(5.4, "RSSI", rssi={0: -40})]
    assert len(build_radio_map(t, 0.1)) == 2


def test_rp_fuses_with_nearest_rssi_only():
    t = [SurveyRecord(0, "RSSI", rssi={0: -40}), SurveyRecord(0.9, "RP", rp=(1, 1)),
         SurveyRecord(1.2, "RSSI", rssi={1: -50})]
    rmap = build_radio_map(t, 0.5)
    assert len(rmap) == 2
    assert np.isnan(rmap.rps[0]).all() and tuple(rmap.rps[1]) == (1, 1)


def test_unsorted_table_raises():
    t = [SurveyRecord(3, "RSSI", rssi={0: -40}), SurveyRecord(1, "RSSI", rssi={0: -41})]
    with pytest.raises(ValidationError):
        build_radio_map(t, 1.0)


@st.composite
def survey_tables(draw):
    n = draw(st.integers(1, 25))
    gaps = draw(st.lists(st.sampled_from([0.25, 0.5, 0.75, 1.0, 1.5, 2.0, 3.0]), min_size=n, max_size=n))
    out = []
    t = 0.0
    for g in gaps:
        t += g
        if draw(st.booleans()):
            out.append(SurveyRecord(t, "RP", rp=(draw(st.integers(0, 30)), draw(st.integers(0, 30)))))
        else:
            aps = draw(st.sets(st.integers(0, 3), min_size=1, max_size=4))
            out.append(SurveyRecord(t, "RSSI", rssi={a: draw(st.integers(-99, 0)) for a in sorted(aps)}))
    return out


@settings(max_examples=150, deadline=None)
@given(survey_tables(), st.sampled_from([0.5, 1.0, 2.0]))
def test_every_rp_lands_in_exactly_one_record(table, eps):
    rmap = build_radio_map(table, eps, n_aps=4)
    assert len(rmap) <= len(table)
    want = sorted(r.rp for r in table if r.kind == "RP")
    got = sorted(tuple(p) for p in rmap.rps[rmap.rp_observed])
    assert got == want


@settings(max_examples=150, deadline=None)
@given(survey_tables(), st.sampled_from([0.5, 1.0, 2.0]))
def test_every_ap_reading_survives(table, eps):
    # each AP seen in the table is seen somewhere in the map, and nothing new appears
    rmap = build_radio_map(table, eps, n_aps=4)
    seen = {a for r in table if r.kind == "RSSI" for a in r.rssi}
    assert set(np.flatnonzero(rmap.observed.any(axis=0))) == seen


@settings(max_examples=150, deadline=None)
@given(survey_tables(), st.sampled_from([0.5, 1.0, 2.0]))
def test_step_one_is_idempotent(table, eps):
    once = merge_rssi_records(table, eps)
    assert merge_rssi_records(once, eps) == once
    rssi_times = [r.time for r in once if r.kind == "RSSI"]
    assert all(b - a > eps for a, b in zip(rssi_times, rssi_times[1:]))
