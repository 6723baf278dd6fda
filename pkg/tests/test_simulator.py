import numpy as np
import pytest

from radimpute.geometry import MultiPolygon, rectangle
from radimpute.mapbuild import build_radio_map
from radimpute.simulator import (VENUES, AccessPoint, GroundTruth, VenueSpec, four_rooms, generate_survey,
                                 label_radio_map, mall, remove_cells, true_rssi)
from radimpute.survey import MAR, MNAR, OBSERVED, RadioMap, ValidationError, read_survey, write_survey


def test_log_distance_example():
    assert true_rssi(AccessPoint(0, 0, tx_power=-30, n=2, cutoff=-99), (10, 0)) == -50


def test_at_the_ap_and_beyond_cutoff():
    assert true_rssi(AccessPoint(0, 0, tx_power=5, n=2), (0, 0)) == 0
    assert true_rssi(AccessPoint(0, 0, tx_power=-40, n=2.5, cutoff=-85), (100, 0)) is None


def test_wall_penalty_per_crossing():
    walls = MultiPolygon([rectangle(4.9, -1, 5.1, 1)])
    ap = AccessPoint(0, 0, tx_power=-30, n=2, cutoff=-99)
    assert true_rssi(ap, (10, 0), walls, wall_penalty=8) == -58


def test_survey_is_time_ordered_and_deterministic(tmp_path):
    spec = four_rooms()
    a, gt_a = generate_survey(spec, 3)
    b, gt_b = generate_survey(spec, 3)
    assert a == b
    np.testing.assert_array_equal(gt_a.labels, gt_b.labels)
    times = [r.time for r in a]
    assert times == sorted(times)
    write_survey(a, tmp_path / "s.jsonl")
    assert read_survey(tmp_path / "s.jsonl") == a


def test_labels_partition_and_agree_with_the_table():
    spec = four_rooms()
    records, gt = generate_survey(spec, 1, p_mar=0.2)
    assert set(np.unique(gt.labels)) <= {OBSERVED, MAR, MNAR}
    # MNAR exactly where the true signal is below cutoff
    assert ((gt.labels == MNAR) == np.isnan(gt.rssi)).all()
    scans = iter(np.flatnonzero(gt.in_table))
    for r in records:
        g = next(scans)
        assert gt.times[g] == r.time
        if r.kind == "RSSI":
            assert sorted(r.rssi) == np.flatnonzero(gt.labels[g] == OBSERVED).tolist()
            assert all(gt.rssi[g, j] == v for j, v in r.rssi.items())


def test_no_mars_without_drops():
    spec = four_rooms()
    records, gt = generate_survey(spec, 0, p_mar=0.0)
    truth = label_radio_map(build_radio_map(records, 0.5, n_aps=spec.n_aps), gt)
    assert not (truth.labels == MAR).any()


def test_cross_room_cells_mostly_mnar():
    # one AP in the middle of each room, same radio model as the built-in venue
    base = four_rooms()
    aps = [AccessPoint(x, y, tx_power=-46, n=4.0, cutoff=-85) for x, y in [(5, 5), (15, 5), (5, 15), (15, 15)]]
    spec = VenueSpec(base.bbox, aps, base.paths, base.walls, p_mar=0.05)
    _, gt = generate_survey(spec, 0)
    room = (gt.positions[:, 0] > 10).astype(int) + 2 * (gt.positions[:, 1] > 10).astype(int)
    cross = np.ones_like(gt.labels, dtype=bool)
    cross[np.arange(len(room)), room] = False
    assert (gt.labels[cross] == MNAR).mean() > 0.8
    assert (gt.labels[~cross] != MNAR).all()


def test_label_radio_map_positions():
    spec = four_rooms()
    records, gt = generate_survey(spec, 2)
    rmap = build_radio_map(records, 0.5, n_aps=spec.n_aps)
    truth = label_radio_map(rmap, gt)
    obs = rmap.rp_observed
    # a fused record sits where its scan was taken, at most epsilon seconds of walking from the RP
    dist = np.hypot(*(truth.rps[obs] - rmap.rps[obs]).T)
    assert dist.max() <= spec.walk_speed * 0.5 + 1e-6
    assert ((truth.labels == OBSERVED) == rmap.observed).all()
    assert not (np.isnan(truth.fingerprints) & rmap.observed).any()


def small_map(seed=0):
    rng = np.random.default_rng(seed)
    fp = rng.integers(-90, -40, size=(100, 3)).astype(float)
    fp[rng.random((100, 3)) < 0.3] = np.nan
    return RadioMap(fp, rng.uniform(0, 9, size=(100, 2)), np.arange(100.0))


def test_remove_cells_identity_and_counts():
    rmap = small_map()
    same, held = remove_cells(rmap, 0.0, "rp")
    assert same == rmap and len(held.cells) == 0
    _, held = remove_cells(rmap, 0.5, "rp", seed=4)
    assert len(held.cells) == 50


@pytest.mark.parametrize("target", ["rssi", "rp"])
def test_remove_cells_partitions_observed_set(target):
    rmap = small_map(1)
    out, held = remove_cells(rmap, 0.3, target, seed=2)
    if target == "rssi":
        before = {tuple(c) for c in np.argwhere(rmap.observed)}
        after = {tuple(c) for c in np.argwhere(out.observed)}
        removed = {tuple(c) for c in held.cells}
        np.testing.assert_array_equal(held.values, rmap.fingerprints[held.cells[:, 0], held.cells[:, 1]])
    else:
        before, after = set(np.flatnonzero(rmap.rp_observed)), set(np.flatnonzero(out.rp_observed))
        removed = set(held.cells.tolist())
    assert removed | after == before and not removed & after


def test_remove_cells_rejects_bad_args():
    with pytest.raises(ValueError):
        remove_cells(small_map(), 1.0, "rp")
    with pytest.raises(ValueError):
        remove_cells(small_map(), 0.1, "rps")


def test_venue_json_round_trip(tmp_path):
    for make in VENUES.values():
        spec = make()
        again = VenueSpec.from_json(spec.to_json())
        assert again.to_json() == spec.to_json()
        assert generate_survey(again, 5)[0] == generate_survey(spec, 5)[0]


def test_venue_validation():
    with pytest.raises(ValidationError):
        VenueSpec((0, 0, 10, 10), [AccessPoint(20, 0)], [[(0, 0), (1, 1)]])
    with pytest.raises(ValidationError):
        VenueSpec((0, 0, 10, 10), [AccessPoint(1, 1)], [[(0, 0)]])


@pytest.mark.parametrize("make", [four_rooms, mall])
def test_paths_do_not_cross_walls(make):
    spec = make()
    for path in spec.paths:
        for a, b in zip(path, path[1:]):
            assert spec.walls.count_crossed(a, b) == 0


def test_ground_truth_round_trip(tmp_path):
    _, gt = generate_survey(four_rooms(), 0, p_mar=0.3)
    gt.to_jsonl(tmp_path / "gt.jsonl")
    again = GroundTruth.from_jsonl(tmp_path / "gt.jsonl")
    np.testing.assert_array_equal(again.labels, gt.labels)
    np.testing.assert_array_equal(again.in_table, gt.in_table)
    np.testing.assert_array_equal(np.isnan(again.rssi), np.isnan(gt.rssi))
