import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from radimpute.positioning import baseline_cd, baseline_li, baseline_mean, knn_locate, locate_all, wknn_locate
from radimpute.survey import RadioMap, ValidationError

from conftest import EXAMPLE_FP, EXAMPLE_RP, EXAMPLE_T


def test_wknn_three_quarters_toward_nearer():
    fps = np.array([[-50.0], [-54.0]])
    rps = np.array([[0.0, 0.0], [4.0, 0.0]])
    # distances 1 and 3: weights 1 and 1/3
    est = wknn_locate((fps, rps), np.array([-51.0]), k=2)
    np.testing.assert_allclose(est, (1.0, 0.0), atol=1e-5)


def test_exact_match_returns_that_rp():
    fps = np.array([[-50.0, -60], [-70, -80]])
    rps = np.array([[1.0, 2], [3, 4]])
    assert wknn_locate((fps, rps), fps[1], k=2).tolist() == [3, 4]


def test_knn_mean_of_neighbours():
    fps = np.array([[-50.0], [-52], [-90]])
    rps = np.array([[0.0, 0], [2, 2], [50, 50]])
    np.testing.assert_allclose(knn_locate((fps, rps), np.array([-51.0]), k=2), (1, 1))


def test_ties_keep_record_order():
    fps = np.array([[-50.0], [-52], [-48]])
    rps = np.array([[0.0, 0], [1, 0], [2, 0]])
    assert knn_locate((fps, rps), np.array([-50.0 + 0.0]), k=1).tolist() == [0, 0]
    assert knn_locate((fps, rps), np.array([-51.0]), k=1).tolist() == [0, 0]


def test_bad_inputs():
    fps, rps = np.array([[-50.0]]), np.array([[0.0, 0]])
    with pytest.raises(ValueError):
        knn_locate((fps, rps), np.array([np.nan]), 1)
    with pytest.raises(ValueError):
        knn_locate((fps, rps), np.array([-50.0]), 2)
    with pytest.raises(ValueError):
        locate_all((fps, rps), [[-50.0]], "svm")


@settings(max_examples=100, deadline=None)
@given(st.integers(0, 10_000), st.integers(1, 6))
def test_knn_matches_brute_force(seed, k):
    rng = np.random.default_rng(seed)
    n = 12
    fps = rng.integers(-100, -30, size=(n, 4)).astype(float)
    rps = rng.uniform(0, 30, size=(n, 2))
    q = rng.integers(-100, -30, size=4).astype(float)
    d = [float(np.linalg.norm(f - q)) for f in fps]
    order = sorted(range(n), key=lambda i: (d[i], i))[:k]
    np.testing.assert_allclose(knn_locate((fps, rps), q, k), rps[order].mean(axis=0))
    if d[order[0]] > 0:
        w = np.array([1 / (d[i] + 1e-6) for i in order])
        np.testing.assert_allclose(wknn_locate((fps, rps), q, k), (w[:, None] * rps[order]).sum(0) / w.sum())


def example_map():
    return RadioMap(EXAMPLE_FP, EXAMPLE_RP, EXAMPLE_T)


def test_case_deletion():
    cd = baseline_cd(example_map())
    assert len(cd) == 3
    assert cd.fingerprints[0].tolist() == [-70, -83, -76, -100, -100]
    with pytest.raises(ValidationError):
        baseline_cd(RadioMap(EXAMPLE_FP[:1], np.array([[np.nan, np.nan]]), EXAMPLE_T[:1]))


def test_linear_interpolation_baseline():
    li = baseline_li(example_map())
    assert not np.isnan(li.fingerprints).any() and li.rp_observed.all()
    assert li.fingerprints[4].tolist() == [-100] * 5


def test_mean_fill_baseline():
    fp = np.array([[-70.0, np.nan, np.nan], [-73, -60, np.nan], [np.nan, -61, np.nan]])
    rmap = RadioMap(fp, np.array([[0.0, 0], [1, 1], [2, 2]]), np.arange(3.0))
    dense = baseline_mean(rmap)
    assert dense.fingerprints[2, 0] == round((-70 - 73) / 2)
    assert dense.fingerprints[0, 1] == round((-60 - 61) / 2)
    assert (dense.fingerprints[:, 2] == -100).all()
