"""Online location estimation (KNN, WKNN) and the CD / LI / mean-fill baselines."""
from __future__ import annotations

import numpy as np

from .differentiator import interpolate_rps
from .survey import MNAR_FILL, RadioMap, ValidationError

DEFAULT_K = 3


def _neighbours(fingerprints: np.ndarray, query: np.ndarray, k: int):
    fps = np.asarray(fingerprints, dtype=float)
    q = np.asarray(query, dtype=float)
    if np.isnan(fps).any() or np.isnan(q).any():
        raise ValueError("positioning needs a dense radio map and a dense query")
    if not 1 <= k <= len(fps):
        raise ValueError(f"k={k} outside [1, {len(fps)}]")
    d = np.sqrt(((fps - q) ** 2).sum(axis=1))
    # stable sort: equal distances keep record order
    order = np.argsort(d, kind="stable")[:k]
    return order, d[order]


def _dense(radio_map):
    if isinstance(radio_map, RadioMap):
        if not radio_map.rp_observed.all():
            raise ValueError("positioning needs every record to carry an RP")
        return radio_map.fingerprints, radio_map.rps
    fps, rps = radio_map
    return np.asarray(fps, dtype=float), np.asarray(rps, dtype=float)


def knn_locate(radio_map, query_fp, k: int = DEFAULT_K) -> np.ndarray:
    """Mean RP of the k records nearest to the query in RSSI space.

    ``radio_map`` is a dense RadioMap or a ``(fingerprints, rps)`` pair.
    """
    fps, rps = _dense(radio_map)
    idx, _ = _neighbours(fps, query_fp, k)
    return rps[idx].mean(axis=0)


def wknn_locate(radio_map, query_fp, k: int = DEFAULT_K) -> np.ndarray:
    """Inverse-distance weighted mean of the k nearest RPs; an exact match wins outright."""
    fps, rps = _dense(radio_map)
    idx, d = _neighbours(fps, query_fp, k)
    if d[0] == 0.0:
        return rps[idx[0]].copy()
    w = 1.0 / (d + 1e-6)
    return (w[:, None] * rps[idx]).sum(axis=0) / w.sum()


def locate_all(radio_map, queries, alg: str = "wknn", k: int = DEFAULT_K) -> np.ndarray:
    fn = {"knn": knn_locate, "wknn": wknn_locate}.get(alg)
    if fn is None:
        raise ValueError(f"unknown estimator {alg!r}")
    return np.array([fn(radio_map, q, k) for q in np.asarray(queries, dtype=float)]).reshape(-1, 2)


def _fill_rssi(fps: np.ndarray, value=MNAR_FILL) -> np.ndarray:
    return np.where(np.isnan(fps), value, fps)


def baseline_cd(rmap: RadioMap, mask=None) -> RadioMap:
    """Case deletion: drop records without an RP, fill null RSSIs with -100."""
    keep = np.flatnonzero(rmap.rp_observed)
    if len(keep) == 0:
        raise ValidationError("case deletion removed every record")
    sub = rmap.subset(keep)
    return sub.replace(fingerprints=_fill_rssi(sub.fingerprints))


def baseline_li(rmap: RadioMap, mask=None) -> RadioMap:
    """Linear interpolation of null RPs along each path; null RSSIs become -100."""
    return rmap.replace(fingerprints=_fill_rssi(rmap.fingerprints), rps=interpolate_rps(rmap))


def baseline_mean(rmap: RadioMap, mask=None) -> RadioMap:
    """Per-AP column mean for null RSSIs (-100 for never-seen APs); RPs interpolated."""
    fps = rmap.fingerprints
    counts = (~np.isnan(fps)).sum(axis=0)
    sums = np.nansum(fps, axis=0)
    means = np.where(counts > 0, sums / np.maximum(counts, 1), MNAR_FILL)
    filled = np.where(np.isnan(fps), np.round(means)[None, :], fps)
    return rmap.replace(fingerprints=filled, rps=interpolate_rps(rmap))
