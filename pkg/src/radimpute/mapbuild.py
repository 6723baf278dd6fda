"""Turn a walking-survey record table into a radio map by epsilon-merging.

Step one folds temporally close RSSI records together; step two fuses each
RP record with the nearest RSSI record within epsilon. Both comparisons are
inclusive (``gap <= epsilon``).
"""
from __future__ import annotations

from collections import defaultdict

import numpy as np

from .survey import RadioMap, SurveyRecord, ValidationError


def _check_sorted(table: list[SurveyRecord]) -> None:
    last: dict[int, float] = {}
    for i, r in enumerate(table):
        if r.path in last and r.time < last[r.path]:
            raise ValidationError(f"survey table not sorted by time at row {i} (t={r.time})")
        last[r.path] = r.time


def _merge_pair(a: dict[int, float], b: dict[int, float]) -> dict[int, float]:
    out = dict(a)
    for ap, v in b.items():
        out[ap] = (out[ap] + v) / 2 if ap in out else v
    return out


def merge_rssi_records(table: list[SurveyRecord], epsilon: float) -> list[SurveyRecord]:
    """Fold consecutive RSSI records whose times differ by at most ``epsilon``.

    The merged record keeps the earlier time, so it anchors the comparison
    with the following record. APs seen in both records are averaged.
    """
    if epsilon <= 0:
        raise ValidationError("epsilon must be positive")
    _check_sorted(table)
    out: list[SurveyRecord] = []
    current: dict[int, int] = {}  # path -> index in out of the open RSSI record
    for r in table:
        if r.kind != "RSSI":
            out.append(r)
            continue
        k = current.get(r.path)
        if k is not None and r.time - out[k].time <= epsilon:
            cur = out[k]
            out[k] = SurveyRecord(cur.time, "RSSI", rssi=_merge_pair(cur.rssi, r.rssi), path=r.path)
        else:
            current[r.path] = len(out)
            out.append(r)
    return out


def merge_rp_rssi(table: list[SurveyRecord], epsilon: float, n_aps: int | None = None) -> RadioMap:
    """Fuse RP and RSSI records within ``epsilon`` into radio map records.

    Each RP takes the nearest still-unfused RSSI record (earlier wins ties).
    A fused record keeps the RSSI record's time; leftover records become
    records with nulls. ``n_aps`` defaults to one past the largest AP index.
    """
    _check_sorted(table)
    if n_aps is None:
        n_aps = 1 + max((ap for r in table if r.rssi for ap in r.rssi), default=-1)

    by_path: dict[int, list[SurveyRecord]] = defaultdict(list)
    for r in table:
        by_path[r.path].append(r)

    fps, rps, times, paths = [], [], [], []
    for p, recs in by_path.items():
        rssi_recs = [r for r in recs if r.kind == "RSSI"]
        rssi_times = np.array([r.time for r in rssi_recs])
        taken = np.zeros(len(rssi_recs), dtype=bool)
        rp_of: dict[int, tuple[float, float]] = {}
        leftovers = []
        for r in recs:
            if r.kind != "RP":
                continue
            gaps = np.abs(rssi_times - r.time) if len(rssi_recs) else np.array([])
            ok = np.flatnonzero((gaps <= epsilon) & ~taken)
            if len(ok):
                # argmin returns the first (earliest) index on ties
                best = ok[np.argmin(gaps[ok])]
                taken[best] = True
                rp_of[int(best)] = r.rp
            else:
                leftovers.append(r)
        rows = [(r.time, i, r.rssi, rp_of.get(i)) for i, r in enumerate(rssi_recs)]
        rows += [(r.time, len(rssi_recs) + k, None, r.rp) for k, r in enumerate(leftovers)]
        rows.sort(key=lambda row: (row[0], row[1]))
        for t, _, rssi, rp in rows:
            fp = np.full(n_aps, np.nan)
            for ap, v in (rssi or {}).items():
                if ap >= n_aps:
                    raise ValidationError(f"AP index {ap} >= n_aps={n_aps}")
                fp[ap] = v
            fps.append(fp)
            rps.append(rp if rp is not None else (np.nan, np.nan))
            times.append(t)
            paths.append(p)
    if not fps:
        return RadioMap(np.zeros((0, n_aps)), np.zeros((0, 2)), [], [])
    return RadioMap(np.array(fps), np.array(rps, dtype=float), times, paths)


def build_radio_map(table: list[SurveyRecord], epsilon: float, n_aps: int | None = None) -> RadioMap:
    """Run both merging steps."""
    return merge_rp_rssi(merge_rssi_records(table, epsilon), epsilon, n_aps)
