"""Domain types for walking-survey data and radio maps, plus their file formats.

A radio map keeps fingerprints in an ``(N, D)`` float array where ``NaN``
marks a null RSSI. The value ``-100`` is a legal RSSI only after MNAR
filling, so it never doubles as the absent marker.
"""
from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, NamedTuple

import numpy as np

RSSI_MIN = -99
RSSI_MAX = 0
MNAR_FILL = -100

MNAR = -1
MAR = 0
OBSERVED = 1


class ValidationError(ValueError):
    """Raised when input data violates a documented contract."""


@dataclass(frozen=True)
class SurveyRecord:
    """One row of a walking survey record table.

    ``kind`` is ``"RP"`` (with ``rp`` set) or ``"RSSI"`` (with a non-empty
    ``rssi`` mapping of AP index to dBm). ``path`` identifies the survey path.
    """

    time: float
    kind: str
    rp: tuple[float, float] | None = None
    rssi: dict[int, float] | None = None
    path: int = 0

    def __post_init__(self):
        if self.kind == "RP":
            if self.rp is None or self.rssi is not None:
                raise ValidationError(f"RP record at t={self.time} needs rp and no rssi")
        elif self.kind == "RSSI":
            if not self.rssi or self.rp is not None:
                raise ValidationError(f"RSSI record at t={self.time} needs non-empty rssi and no rp")
        else:
            raise ValidationError(f"unknown record kind {self.kind!r}")


@dataclass(frozen=True)
class RadioMap:
    """N radio map records over D APs.

    Attributes
    ----------
    fingerprints : (N, D) float array, NaN where the RSSI is null.
    rps : (N, 2) float array of venue-local meters, NaN rows where the RP is null.
    times : (N,) seconds.
    paths : (N,) integer survey path ids.
    """

    fingerprints: np.ndarray
    rps: np.ndarray
    times: np.ndarray
    paths: np.ndarray = field(default=None)

    def __post_init__(self):
        fp = np.array(self.fingerprints, dtype=float, ndmin=2)
        if fp.size == 0:
            fp = fp.reshape(len(np.atleast_1d(self.times)), -1)
        rps = np.array(self.rps, dtype=float).reshape(-1, 2)
        times = np.array(self.times, dtype=float).reshape(-1)
        paths = (np.zeros(len(times), dtype=np.int64) if self.paths is None
                 else np.array(self.paths, dtype=np.int64).reshape(-1))
        if not (len(fp) == len(rps) == len(times) == len(paths)):
            raise ValidationError("radio map arrays disagree on N")
        for arr in (fp, rps, times, paths):
            arr.flags.writeable = False
        object.__setattr__(self, "fingerprints", fp)
        object.__setattr__(self, "rps", rps)
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "paths", paths)

    def __len__(self):
        return len(self.times)

    @property
    def n_aps(self) -> int:
        return self.fingerprints.shape[1]

    @property
    def observed(self) -> np.ndarray:
        """Boolean (N, D) matrix of non-null RSSI cells."""
        return ~np.isnan(self.fingerprints)

    @property
    def rp_observed(self) -> np.ndarray:
        return ~np.isnan(self.rps).any(axis=1)

    def replace(self, **changes) -> "RadioMap":
        kw = dict(fingerprints=self.fingerprints, rps=self.rps,
                  times=self.times, paths=self.paths)
        kw.update(changes)
        return RadioMap(**kw)

    def subset(self, index) -> "RadioMap":
        return RadioMap(self.fingerprints[index], self.rps[index],
                        self.times[index], self.paths[index])

    def path_slices(self) -> list[np.ndarray]:
        """Record indices per path, each ordered by time, paths in first-seen order."""
        out = []
        for p in dict.fromkeys(self.paths.tolist()):
            idx = np.flatnonzero(self.paths == p)
            out.append(idx[np.argsort(self.times[idx], kind="stable")])
        return out

    def __eq__(self, other):
        if not isinstance(other, RadioMap):
            return NotImplemented
        return (np.array_equal(self.fingerprints, other.fingerprints, equal_nan=True)
                and np.array_equal(self.rps, other.rps, equal_nan=True)
                and np.array_equal(self.times, other.times)
                and np.array_equal(self.paths, other.paths))

    __hash__ = None


class Violation(NamedTuple):
    index: int
    field: str
    rule: str


def _legal_rssi(v: float) -> bool:
    return v == MNAR_FILL or (RSSI_MIN <= v <= RSSI_MAX)


def validate_radio_map(rmap: RadioMap) -> list[Violation]:
    """Return every invariant violation in ``rmap``; an empty list means valid."""
    out: list[Violation] = []
    fp = rmap.fingerprints
    for i, j in zip(*np.nonzero(~np.isnan(fp))):
        if not _legal_rssi(fp[i, j]):
            out.append(Violation(int(i), f"fp[{j}]", f"rssi {fp[i, j]:g} outside [-99, 0] and not -100"))
    for i in np.flatnonzero(np.isnan(rmap.rps).any(axis=1) & ~np.isnan(rmap.rps).all(axis=1)):
        out.append(Violation(int(i), "rp", "partially null reference point"))
    for i in np.flatnonzero(~np.isfinite(rmap.times)):
        out.append(Violation(int(i), "t", "non-finite time"))
    last: dict[int, tuple[int, float]] = {}
    for i, (p, t) in enumerate(zip(rmap.paths.tolist(), rmap.times.tolist())):
        if p in last and not t > last[p][1]:
            out.append(Violation(i, "t", f"time {t:g} not after record {last[p][0]} on path {p}"))
        last[p] = (i, t)
    return out


# masks ---------------------------------------------------------------------

def observed_mask(rmap: RadioMap) -> np.ndarray:
    """Mask with 1 on observed cells and 0 on nulls (everything treated as MAR)."""
    return rmap.observed.astype(np.int8)


def amend_mask(rmap: RadioMap, mask: np.ndarray) -> tuple[RadioMap, np.ndarray]:
    """Fill MNAR cells with -100 and mark them observed (M -> M')."""
    mask = np.asarray(mask)
    check_mask(rmap, mask)
    fp = rmap.fingerprints.copy()
    fp[mask == MNAR] = MNAR_FILL
    amended = mask.astype(np.int8, copy=True)
    amended[mask == MNAR] = OBSERVED
    return rmap.replace(fingerprints=fp), amended


def check_mask(rmap: RadioMap, mask: np.ndarray) -> None:
    if mask.shape != rmap.fingerprints.shape:
        raise ValidationError(f"mask shape {mask.shape} != map shape {rmap.fingerprints.shape}")
    if not np.isin(mask, (MNAR, MAR, OBSERVED)).all():
        raise ValidationError("mask entries must be in {-1, 0, 1}")
    if not np.array_equal(mask == OBSERVED, rmap.observed):
        raise ValidationError("mask marks observed cells differently from the map's nulls")


# file formats --------------------------------------------------------------

def _num(x: float):
    return int(x) if float(x).is_integer() else float(x)


def write_survey(records: Iterable[SurveyRecord], path) -> None:
    with open(path, "w") as fh:
        for r in records:
            row = {"t": r.time, "kind": r.kind}
            if r.rp is not None:
                row["rp"] = [r.rp[0], r.rp[1]]
            if r.rssi is not None:
                row["rssi"] = {str(k): _num(v) for k, v in sorted(r.rssi.items())}
            if r.path:
                row["path"] = r.path
            fh.write(json.dumps(row) + "\n")


def read_survey(path) -> list[SurveyRecord]:
    out = []
    for line in Path(path).read_text().splitlines():
        if not line.strip():
            continue
        row = json.loads(line)
        rp = tuple(row["rp"]) if row.get("rp") is not None else None
        rssi = ({int(k): v for k, v in row["rssi"].items()}
                if row.get("rssi") is not None else None)
        out.append(SurveyRecord(float(row["t"]), row["kind"], rp, rssi, int(row.get("path", 0))))
    return out


def write_radio_map(rmap: RadioMap, path) -> None:
    with open(path, "w") as fh:
        for fp, rp, t, p in zip(rmap.fingerprints, rmap.rps, rmap.times, rmap.paths):
            row = {
                "t": float(t),
                "path": int(p),
                "rp": None if np.isnan(rp).any() else [float(rp[0]), float(rp[1])],
                "fp": [None if np.isnan(v) else _num(v) for v in fp],
            }
            fh.write(json.dumps(row) + "\n")


def read_radio_map(path) -> RadioMap:
    rows = [json.loads(line) for line in Path(path).read_text().splitlines() if line.strip()]
    if not rows:
        raise ValidationError(f"{path}: empty radio map")
    widths = {len(r["fp"]) for r in rows}
    if len(widths) != 1:
        raise ValidationError(f"{path}: fingerprints have differing lengths {sorted(widths)}")
    fp = np.array([[np.nan if v is None else v for v in r["fp"]] for r in rows], dtype=float)
    rps = np.array([[np.nan, np.nan] if r.get("rp") is None else r["rp"] for r in rows], dtype=float)
    return RadioMap(fp, rps, [r["t"] for r in rows], [r.get("path", 0) for r in rows])


def write_mask(mask: np.ndarray, path) -> None:
    with open(path, "w", newline="") as fh:
        csv.writer(fh).writerows(np.asarray(mask, dtype=int).tolist())


def read_mask(path) -> np.ndarray:
    with open(path, newline="") as fh:
        rows = [list(map(int, row)) for row in csv.reader(fh) if row]
    return np.array(rows, dtype=np.int8)
