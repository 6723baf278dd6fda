"""Synthetic venues and walking surveys with full ground truth.

Signals follow log-distance path loss with a fixed penalty per wall crossed
and Gaussian noise. A reading below an AP's cutoff is unobservable (the
generative MNAR case); an observable reading is dropped with probability
``p_mar`` (the MAR case) and its true value kept in the ground truth.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .geometry import MultiPolygon, rectangle
from .survey import (MAR, MNAR, OBSERVED, RSSI_MAX, RSSI_MIN, RadioMap, SurveyRecord,
                     ValidationError)


@dataclass(frozen=True)
class AccessPoint:
    x: float
    y: float
    tx_power: float = -40.0
    n: float = 2.5
    cutoff: float = -85.0


@dataclass
class VenueSpec:
    bbox: tuple[float, float, float, float]
    aps: list[AccessPoint]
    paths: list[list[tuple[float, float]]]
    walls: MultiPolygon = field(default_factory=MultiPolygon)
    walk_speed: float = 1.0
    rp_spacing: float = 5.0
    rssi_period: float = 1.0
    noise_sigma: float = 2.0
    wall_penalty: float = 8.0
    p_mar: float = 0.05
    speed_jitter: float = 0.0     # fractional speed variation per meter walked
    rssi_phase: float = 0.3       # offset of the first scan after a path starts
    path_gap: float = 10.0        # idle seconds between consecutive paths
    name: str = "venue"

    def __post_init__(self):
        x0, y0, x1, y1 = self.bbox
        if not (x1 > x0 and y1 > y0):
            raise ValidationError("empty bounding box")
        if self.rp_spacing <= 0 or self.rssi_period <= 0 or self.walk_speed <= 0:
            raise ValidationError("rp_spacing, rssi_period and walk_speed must be positive")
        if not 0 <= self.speed_jitter < 1:
            raise ValidationError("speed_jitter must be in [0, 1)")
        inside = lambda p: x0 <= p[0] <= x1 and y0 <= p[1] <= y1
        for ap in self.aps:
            if not inside((ap.x, ap.y)):
                raise ValidationError(f"AP at ({ap.x}, {ap.y}) lies outside the bounding box")
        for path in self.paths:
            if len(path) < 2:
                raise ValidationError("a path needs at least two waypoints")
            if not all(inside(p) for p in path):
                raise ValidationError("path waypoint outside the bounding box")

    @property
    def n_aps(self) -> int:
        return len(self.aps)

    def to_json(self) -> dict:
        d = {k: getattr(self, k) for k in ("walk_speed", "rp_spacing", "rssi_period", "noise_sigma",
                                           "wall_penalty", "p_mar", "speed_jitter", "rssi_phase",
                                           "path_gap", "name")}
        d.update(bbox=list(self.bbox), aps=[vars(a) for a in self.aps],
                 paths=[[list(p) for p in path] for path in self.paths], walls=self.walls.to_geojson())
        return d

    @classmethod
    def from_json(cls, obj: dict) -> "VenueSpec":
        obj = dict(obj)
        walls = MultiPolygon.from_geojson(obj.pop("walls")) if obj.get("walls") else MultiPolygon()
        obj.pop("walls", None)
        return cls(bbox=tuple(obj.pop("bbox")), aps=[AccessPoint(**a) for a in obj.pop("aps")],
                   paths=[[tuple(p) for p in path] for path in obj.pop("paths")], walls=walls, **obj)

    @classmethod
    def load(cls, path) -> "VenueSpec":
        path = str(path)
        if path in VENUES:
            return VENUES[path]()
        return cls.from_json(json.loads(Path(path).read_text()))


def true_rssi(ap: AccessPoint, point, walls: MultiPolygon | None = None, wall_penalty: float = 8.0,
              noise_sigma: float = 0.0, rng: np.random.Generator | None = None) -> int | None:
    """Received RSSI of ``ap`` at ``point`` or None when below the AP's cutoff."""
    d = math.hypot(point[0] - ap.x, point[1] - ap.y)
    r = ap.tx_power - 10.0 * ap.n * math.log10(max(d, 1.0))
    if walls is not None and len(walls) and wall_penalty:
        r -= wall_penalty * walls.count_crossed((ap.x, ap.y), (float(point[0]), float(point[1])))
    if noise_sigma > 0:
        r += (rng if rng is not None else np.random.default_rng()).normal(0.0, noise_sigma)
    r = round(r)
    if r < ap.cutoff:
        return None
    return int(min(max(r, RSSI_MIN), RSSI_MAX))


@dataclass(frozen=True)
class GroundTruth:
    """One row per survey event in time order: true position, true RSSI vector
    (NaN where unobservable) and label per AP (1 observed, 0 MAR, -1 MNAR).

    ``in_table`` is False for scans whose every reading was dropped; such
    scans leave no survey record but their MAR readings stay on file here.
    """

    times: np.ndarray
    paths: np.ndarray
    positions: np.ndarray
    rssi: np.ndarray
    labels: np.ndarray
    in_table: np.ndarray | None = None

    def to_jsonl(self, path) -> None:
        with open(path, "w") as fh:
            for i, (t, p, pos, r, lab) in enumerate(zip(self.times, self.paths, self.positions, self.rssi,
                                                        self.labels)):
                fh.write(json.dumps({"t": float(t), "path": int(p), "pos": [float(pos[0]), float(pos[1])],
                                     "rssi": [None if np.isnan(v) else int(v) for v in r],
                                     "label": [int(v) for v in lab],
                                     "in_table": True if self.in_table is None else bool(self.in_table[i])})
                         + "\n")

    @classmethod
    def from_jsonl(cls, path) -> "GroundTruth":
        rows = [json.loads(line) for line in Path(path).read_text().splitlines() if line.strip()]
        return cls(np.array([r["t"] for r in rows], dtype=float), np.array([r["path"] for r in rows]),
                   np.array([r["pos"] for r in rows], dtype=float).reshape(-1, 2),
                   np.array([[np.nan if v is None else v for v in r["rssi"]] for r in rows], dtype=float),
                   np.array([r["label"] for r in rows], dtype=np.int8),
                   np.array([r.get("in_table", True) for r in rows], dtype=bool))

    def lookup(self, path: int, time: float) -> int:
        hit = (self.paths == path) & (self.times == time)
        if self.in_table is not None:
            hit &= self.in_table
        hit = np.flatnonzero(hit)
        if len(hit) == 0:
            raise KeyError(f"no ground truth for path {path} at t={time}")
        return int(hit[0])


def _walk_clock(path, speed: float, jitter: float, rng: np.random.Generator):
    """Arc-length knots, their times, and the waypoint polyline as arrays."""
    pts = np.asarray(path, dtype=float)
    seg = np.hypot(*np.diff(pts, axis=0).T)
    arc = np.concatenate([[0.0], np.cumsum(seg)])
    n = max(1, int(math.ceil(arc[-1])))
    knots = np.linspace(0.0, arc[-1], n + 1)
    v = speed * (1.0 + jitter * rng.uniform(-1.0, 1.0, n)) if jitter else np.full(n, speed)
    clock = np.concatenate([[0.0], np.cumsum(np.diff(knots) / v)])
    return pts, arc, knots, clock


def _position(pts, arc, s):
    return np.column_stack([np.interp(s, arc, pts[:, 0]), np.interp(s, arc, pts[:, 1])])


def generate_survey(spec: VenueSpec, seed: int = 0, p_mar: float | None = None):
    """Walk every path in turn and emit the interleaved survey table plus ground truth."""
    rng = np.random.default_rng(seed)
    p_mar = spec.p_mar if p_mar is None else p_mar
    D = spec.n_aps
    records: list[SurveyRecord] = []
    t_rows, p_rows, pos_rows, rssi_rows, lab_rows = [], [], [], [], []
    emitted: list[bool] = []
    t0 = 0.0
    for pid, path in enumerate(spec.paths):
        pts, arc, knots, clock = _walk_clock(path, spec.walk_speed, spec.speed_jitter, rng)
        duration = clock[-1]
        rp_s = np.arange(0.0, arc[-1] + 1e-9, spec.rp_spacing)
        rp_t = np.interp(rp_s, knots, clock)
        scan_t = np.arange(spec.rssi_phase, duration, spec.rssi_period)
        events = sorted([(t, 1, "rp") for t in rp_t] + [(t, 0, "rssi") for t in scan_t])
        for t, _, kind in events:
            s = np.interp(t, clock, knots)
            pos = _position(pts, arc, s)[0]
            truth = np.full(D, np.nan)
            for j, ap in enumerate(spec.aps):
                v = true_rssi(ap, pos, spec.walls, spec.wall_penalty, spec.noise_sigma, rng)
                if v is not None:
                    truth[j] = v
            labels = np.where(np.isnan(truth), MNAR, OBSERVED).astype(np.int8)
            t_abs = round(t0 + t, 6)
            if kind == "rp":
                # an RP record carries no scan; its in-range cells are MAR
                labels[labels == OBSERVED] = MAR
                records.append(SurveyRecord(t_abs, "RP", rp=(round(float(pos[0]), 6), round(float(pos[1]), 6)),
                                            path=pid))
                emitted.append(True)
            else:
                drop = (labels == OBSERVED) & (rng.random(D) < p_mar)
                labels[drop] = MAR
                seen = {j: int(truth[j]) for j in np.flatnonzero(labels == OBSERVED)}
                # a scan with nothing left to report leaves no record in the table
                if seen:
                    records.append(SurveyRecord(t_abs, "RSSI", rssi=seen, path=pid))
                emitted.append(bool(seen))
            t_rows.append(t_abs)
            p_rows.append(pid)
            pos_rows.append(pos)
            rssi_rows.append(truth)
            lab_rows.append(labels)
        t0 = round(t0 + duration + spec.path_gap, 6)
    gt = GroundTruth(np.array(t_rows), np.array(p_rows), np.array(pos_rows).reshape(-1, 2),
                     np.array(rssi_rows).reshape(-1, D), np.array(lab_rows, dtype=np.int8).reshape(-1, D),
                     np.array(emitted, dtype=bool))
    return records, gt


@dataclass(frozen=True)
class MapTruth:
    """Ground truth aligned with the records of a built radio map."""

    fingerprints: np.ndarray  # true RSSI, NaN where unobservable
    rps: np.ndarray           # true location of each record
    labels: np.ndarray        # 1 observed, 0 MAR, -1 MNAR


def label_radio_map(rmap: RadioMap, truth: GroundTruth, survey: list[SurveyRecord] | None = None) -> MapTruth:
    """Match every radio-map record to the survey scan that produced it.

    Merged records keep the time of their (first) RSSI record, so a
    time match recovers the scan. Pure RP records match their RP event.
    Labels of cells observed in the map are 1; null cells keep the scan's
    label, except that cells filled by a later merged scan count as observed.
    """
    N, D = rmap.fingerprints.shape
    fps = np.full((N, D), np.nan)
    rps = np.zeros((N, 2))
    labels = np.zeros((N, D), dtype=np.int8)
    obs = rmap.observed
    for i, (t, p) in enumerate(zip(rmap.times, rmap.paths)):
        g = truth.lookup(int(p), float(t))
        fps[i] = truth.rssi[g]
        rps[i] = truth.positions[g]
        labels[i] = np.where(obs[i], OBSERVED, truth.labels[g])
        # a cell observed by a merged neighbour scan but not by this one: keep as observed
        labels[i][(labels[i] == OBSERVED) & ~obs[i]] = MAR
    return MapTruth(fps, rps, labels)


@dataclass(frozen=True)
class HeldOut:
    target: str
    cells: np.ndarray   # (n, 2) (record, ap) for rssi; (n,) record indices for rp
    values: np.ndarray


def remove_cells(rmap: RadioMap, beta: float, target: str, seed: int = 0):
    """Remove a fraction ``beta`` of observed RSSI cells or observed RPs.

    Returns the reduced map and the held-out truth.
    """
    if not 0 <= beta < 1:
        raise ValueError("beta must be in [0, 1)")
    rng = np.random.default_rng(seed)
    if target == "rssi":
        cand = np.argwhere(rmap.observed)
        n = int(round(beta * len(cand)))
        cells = cand[np.sort(rng.choice(len(cand), size=n, replace=False))] if n else np.zeros((0, 2), int)
        values = rmap.fingerprints[cells[:, 0], cells[:, 1]].copy()
        fps = rmap.fingerprints.copy()
        fps[cells[:, 0], cells[:, 1]] = np.nan
        return rmap.replace(fingerprints=fps), HeldOut("rssi", cells, values)
    if target == "rp":
        cand = np.flatnonzero(rmap.rp_observed)
        n = int(round(beta * len(cand)))
        idx = np.sort(rng.choice(cand, size=n, replace=False)) if n else np.zeros(0, int)
        values = rmap.rps[idx].copy()
        rps = rmap.rps.copy()
        rps[idx] = np.nan
        return rmap.replace(rps=rps), HeldOut("rp", idx, values)
    raise ValueError(f"target must be 'rssi' or 'rp', got {target!r}")


# built-in venues ------------------------------------------------------------

def _wall(x0, y0, x1, y1, thickness=0.2):
    h = thickness / 2
    if x0 == x1:
        return rectangle(x0 - h, y0, x0 + h, y1)
    return rectangle(x0, y0 - h, x1, y1 + h)


def _serpentine(x0, y0, x1, y1, rows):
    pts = []
    for i, y in enumerate(np.linspace(y0, y1, rows)):
        xs = (x0, x1) if i % 2 == 0 else (x1, x0)
        pts += [(xs[0], float(y)), (xs[1], float(y))]
    return pts


def four_rooms(**overrides) -> VenueSpec:
    """20 m x 20 m square split into four rooms by cross walls with doorways.

    One AP sits in each doorway, so every room sees the two APs of its own
    doors and hardly any of the other two. One serpentine path per room.
    """
    walls = [
        _wall(10, 0, 10, 4), _wall(10, 6, 10, 14), _wall(10, 16, 10, 20),
        _wall(0, 10, 4, 10), _wall(6, 10, 14, 10), _wall(16, 10, 20, 10),
    ]
    doors = [(10, 5), (10, 15), (5, 10), (15, 10)]
    aps = [AccessPoint(x, y, tx_power=-46.0, n=4.0, cutoff=-85.0) for x, y in doors]
    centers = [(5, 5), (15, 5), (5, 15), (15, 15)]
    paths = [_serpentine(x - 3, y - 3, x + 3, y + 3, 8) for x, y in centers]
    spec = VenueSpec(bbox=(0, 0, 20, 20), aps=aps, paths=paths, walls=MultiPolygon(walls), name="four_rooms")
    return replace(spec, **overrides) if overrides else spec


_SHOPS = {  # name: (x0, x1, door x, bottom row?)
    "A": (0, 13, 6, True), "B": (13, 27, 19, True), "C": (27, 40, 33, True),
    "D": (0, 13, 6, False), "E": (13, 27, 19, False), "F": (27, 40, 33, False),
}
_MALL_ROUTES = ["ABC", "FED", "BFA", "DCE", "CAE", "EBD", "AFC", "DBF"]


def _shop_loop(name, clockwise):
    x0, x1, dx, bottom = _SHOPS[name]
    near, far = (6.0, 2.0) if bottom else (14.0, 18.0)
    loop = [(dx, near), (x0 + 2.0, near), (x0 + 2.0, far), (x1 - 2.0, far), (x1 - 2.0, near), (dx, near)]
    if clockwise:
        loop = loop[:1] + loop[-2:0:-1] + loop[-1:]
    return [(float(dx), 10.0)] + loop + [(float(dx), 10.0)]


def _route(shops: str, index: int):
    start = (1.0, 10.0) if index % 2 == 0 else (39.0, 10.0)
    pts = [start]
    for j, name in enumerate(shops):
        pts += _shop_loop(name, clockwise=(index + j) % 2 == 1)
    pts.append((39.0, 10.0) if index % 2 == 0 else (1.0, 10.0))
    # drop consecutive duplicates
    return [p for i, p in enumerate(pts) if i == 0 or p != pts[i - 1]]


def mall(**overrides) -> VenueSpec:
    """A 40 m x 20 m floor: a central corridor with three shops on each side.

    Ten APs; eight survey paths each walk the corridor and loop through three
    shops, at an irregular pace, so most places are surveyed more than once.
    """
    walls = []
    for x0, x1, dx, bottom in _SHOPS.values():
        y = 8 if bottom else 12
        walls += [_wall(x0 + 0.5, y, dx - 1, y), _wall(dx + 1, y, x1 - 0.5, y)]
    for x in (13, 27):
        walls += [_wall(x, 0.5, x, 8), _wall(x, 12, x, 19.5)]
    aps = [AccessPoint(x, y, tx_power=-42.0 + dt, n=3.0, cutoff=-85.0) for (x, y), dt in [
        ((6, 3), 0), ((20, 3), -2), ((34, 4), 1), ((6, 17), -1), ((20, 17), 0), ((34, 16), -3),
        ((4, 10), 2), ((16, 10), -1), ((28, 10), 0), ((38, 10), -2)]]
    paths = [_route(r, i) for i, r in enumerate(_MALL_ROUTES)]
    spec = VenueSpec(bbox=(0, 0, 40, 20), aps=aps, paths=paths, walls=MultiPolygon(walls), noise_sigma=2.0,
                     speed_jitter=0.5, p_mar=0.1, name="mall")
    return replace(spec, **overrides) if overrides else spec


VENUES = {"four_rooms": four_rooms, "mall": mall}
