"""Label every null RSSI as missing-at-random (0) or not-at-random (-1).

Records are described by a binary AP profile plus a location (observed or
linearly interpolated along the survey path). Records are clustered, and a
null in AP dimension j is MAR when more than ``eta`` of its cluster observed j.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np
from scipy.spatial import cKDTree

from .survey import MAR, MNAR, OBSERVED, RadioMap, ValidationError

log = logging.getLogger(__name__)


class SamplingExhausted(RuntimeError):
    """Not enough adjacent-RP groups to draw the requested MNAR sample."""

    def __init__(self, achieved: int, requested: int):
        super().__init__(f"sampled {achieved} of {requested} requested MNAR cells")
        self.achieved = achieved
        self.requested = requested


@dataclass(frozen=True)
class ApProfiles:
    """Binary AP profiles (N, D) and record locations (N, 2) in meters."""

    binary: np.ndarray
    locations: np.ndarray

    def __len__(self):
        return len(self.binary)

    def matrix(self, location_scale: float | None = None) -> np.ndarray:
        """Clustering features: profile bits followed by scaled coordinates.

        Coordinates are divided by ``location_scale`` (the bounding-box
        diagonal of the locations by default) so both parts weigh comparably.
        """
        if location_scale is None:
            location_scale = bbox_diagonal(self.locations)
        return np.hstack([self.binary.astype(float), self.locations / location_scale])

    def with_binary(self, binary: np.ndarray) -> "ApProfiles":
        return ApProfiles(binary, self.locations)


@dataclass(frozen=True)
class Clustering:
    assignments: np.ndarray
    centers: np.ndarray | None = None

    @property
    def n_clusters(self) -> int:
        return int(self.assignments.max()) + 1 if len(self.assignments) else 0

    def members(self) -> list[np.ndarray]:
        return [np.flatnonzero(self.assignments == c) for c in range(self.n_clusters)]


@dataclass(frozen=True)
class GroundTruthSample:
    """Sampled cells ``(record, ap)`` with labels 0 (MAR) or -1 (MNAR)."""

    cells: np.ndarray
    labels: np.ndarray
    gamma: float

    @property
    def n_mar(self) -> int:
        return int((self.labels == MAR).sum())

    @property
    def n_mnar(self) -> int:
        return int((self.labels == MNAR).sum())


def bbox_diagonal(points: np.ndarray) -> float:
    if len(points) == 0:
        return 1.0
    d = float(np.hypot(*(points.max(axis=0) - points.min(axis=0))))
    return d if d > 0 else 1.0


def binarize(fingerprint) -> np.ndarray:
    """1 where the RSSI is observed, 0 where it is null (NaN)."""
    return (~np.isnan(np.asarray(fingerprint, dtype=float))).astype(np.int8)


def interpolate_rps(rmap: RadioMap) -> np.ndarray:
    """Fill null RPs by time-weighted linear interpolation along each path.

    Nulls before the first (after the last) observed RP copy that RP.
    """
    out = rmap.rps.copy()
    for idx in rmap.path_slices():
        obs = idx[rmap.rp_observed[idx]]
        if len(obs) == 0:
            raise ValidationError(f"path {int(rmap.paths[idx[0]])} has no observed RP to place its records")
        t_obs = rmap.times[obs]
        for axis in (0, 1):
            out[idx, axis] = np.interp(rmap.times[idx], t_obs, rmap.rps[obs, axis])
        out[obs] = rmap.rps[obs]
    return out


def build_samples(rmap: RadioMap) -> ApProfiles:
    """One profile per record: binarized fingerprint and observed-or-interpolated RP."""
    return ApProfiles(rmap.observed.astype(np.int8), interpolate_rps(rmap))


def differentiate(observed: np.ndarray, clustering: Clustering, eta: float) -> np.ndarray:
    """Mask matrix: 1 observed, 0 MAR, -1 MNAR.

    ``observed`` is a RadioMap or its (N, D) boolean/binary observation matrix.
    """
    if isinstance(observed, RadioMap):
        observed = observed.observed
    observed = np.asarray(observed).astype(bool)
    if len(clustering.assignments) != len(observed):
        raise ValueError("clustering does not cover every record")
    mask = np.where(observed, OBSERVED, MNAR).astype(np.int8)
    for members in clustering.members():
        if len(members) == 0:
            raise RuntimeError("empty cluster in clustering")
        frac = observed[members].mean(axis=0)
        mar_dims = frac > eta
        block = mask[members]
        block[:, mar_dims] = np.where(observed[members][:, mar_dims], OBSERVED, MAR)
        mask[members] = block
    return mask


def differentiation_accuracy(predicted: np.ndarray, truth: GroundTruthSample) -> float:
    """Balanced accuracy: mean of the MAR hit rate and the MNAR hit rate."""
    rows, cols = truth.cells[:, 0], truth.cells[:, 1]
    pred = np.asarray(predicted)[rows, cols]
    is_mar = truth.labels == MAR
    is_mnar = truth.labels == MNAR
    if not is_mar.any() or not is_mnar.any():
        raise ValueError("differentiation accuracy needs both MAR and MNAR truth cells")
    tpr = float((pred[is_mar] == MAR).mean())
    tnr = float((pred[is_mnar] == MNAR).mean())
    return (tpr + tnr) / 2


# ground-truth sampling ----------------------------------------------------

GROUP_SIZE = 6


def mnar_candidates(profiles: ApProfiles, rp_index: np.ndarray | None = None,
                    group_size: int = GROUP_SIZE) -> list[np.ndarray]:
    """Candidate MNAR groups: for each anchor RP, the anchor and its nearest
    ``group_size - 1`` RPs, paired with AP dimensions none of them observed.

    Returns one (n, 2) array of (record, ap) cells per anchor (possibly empty).
    """
    if rp_index is None:
        rp_index = np.arange(len(profiles))
    if len(rp_index) < group_size:
        return []
    tree = cKDTree(profiles.locations[rp_index])
    _, nn = tree.query(profiles.locations[rp_index], k=group_size)
    out = []
    for row in nn:
        members = rp_index[np.sort(row)]
        dims = np.flatnonzero(~profiles.binary[members].any(axis=0))
        out.append(np.array([(r, d) for r in members for d in dims], dtype=np.int64).reshape(-1, 2))
    return out


def sample_ground_truth(profiles: ApProfiles, gamma: float, mnar_count: int, seed: int,
                        rp_index: np.ndarray | None = None):
    """Create a labeled sample with ``#MNAR / #MAR = gamma``.

    MNAR cells come from groups of adjacent RPs that all miss a common AP;
    MAR cells are observed cells picked uniformly and nullified. Returns the
    sample and the profiles with the MAR cells removed.
    """
    rng = np.random.default_rng(seed)
    groups = mnar_candidates(profiles, rp_index)
    chosen: dict[tuple[int, int], None] = {}
    for g in rng.permutation(len(groups)):
        for r, d in groups[g]:
            if len(chosen) >= mnar_count:
                break
            chosen.setdefault((int(r), int(d)))
        if len(chosen) >= mnar_count:
            break
    if len(chosen) < mnar_count:
        raise SamplingExhausted(len(chosen), mnar_count)
    mnar_cells = np.array(list(chosen), dtype=np.int64).reshape(-1, 2)

    n_mar = max(1, int(round(mnar_count / gamma)))
    obs = np.argwhere(profiles.binary == 1)
    if len(obs) < n_mar:
        raise SamplingExhausted(len(obs), n_mar)
    mar_cells = obs[np.sort(rng.choice(len(obs), size=n_mar, replace=False))]

    binary = profiles.binary.copy()
    binary[mar_cells[:, 0], mar_cells[:, 1]] = 0
    cells = np.vstack([mar_cells, mnar_cells])
    labels = np.concatenate([np.full(len(mar_cells), MAR), np.full(len(mnar_cells), MNAR)]).astype(np.int8)
    return GroundTruthSample(cells, labels, gamma), profiles.with_binary(binary)


def default_mnar_count(profiles: ApProfiles, rp_index: np.ndarray | None = None) -> int:
    """Half the distinct candidate MNAR cells, capped at a fifth of the observed cells."""
    cells = {(int(r), int(d)) for g in mnar_candidates(profiles, rp_index) for r, d in g}
    return max(1, min(len(cells) // 2, int(profiles.binary.sum()) // 5))


# clustering-driven differentiators -----------------------------------------

def _subseed(*parts) -> int:
    return int(np.random.SeedSequence([int(p) for p in parts]).generate_state(1)[0])


def akm(profiles: ApProfiles, gamma_list, k_upper: int, seed: int = 0, mnar_count: int | None = None,
        rp_index: np.ndarray | None = None, return_scores: bool = False, eta: float = 0.1):
    """K-means whose K maximizes the average DA over sampled ground truths.

    For each gamma a labeled sample is drawn and the reduced sample set is
    clustered for every K up to ``k_upper``; the winning K (smallest on ties)
    is then used to cluster the full sample set.
    """
    from .clustering import kmeans

    gamma_list = list(gamma_list)
    if k_upper < 1 or not gamma_list:
        raise ValueError("akm needs k_upper >= 1 and a non-empty gamma list")
    k_upper = min(k_upper, len(profiles))
    if mnar_count is None:
        mnar_count = default_mnar_count(profiles, rp_index)
    scale = bbox_diagonal(profiles.locations)
    samples = []
    for gi, gamma in enumerate(gamma_list):
        truth, reduced = sample_ground_truth(profiles, gamma, mnar_count, _subseed(seed, 1, gi), rp_index)
        samples.append((truth, reduced))
    scores = np.zeros(k_upper)
    if k_upper > 1:
        for k in range(1, k_upper + 1):
            das = []
            for gi, (truth, reduced) in enumerate(samples):
                cl = kmeans(reduced.matrix(scale), k, _subseed(seed, k, gi))
                das.append(differentiation_accuracy(differentiate(reduced.binary, cl, eta), truth))
            scores[k - 1] = np.mean(das)
    best = int(np.argmax(scores)) + 1
    log.debug("akm: DA per K = %s -> K=%d", np.round(scores, 4).tolist(), best)
    result = kmeans(profiles.matrix(scale), best, seed)
    return (result, scores) if return_scores else result


METHODS = ("elkm", "akm", "tac", "mar-only", "mnar-only")


def differentiate_map(rmap: RadioMap, method: str, eta: float = 0.1, *, topology=None,
                      k_upper: int = 200, k_max: int | None = None, gammas=tuple(range(1, 21)),
                      seed: int = 0, mnar_count: int | None = None) -> np.ndarray:
    """Mask matrix of a radio map using one of ``METHODS``."""
    from .clustering import elkm, tac

    observed = rmap.observed
    if method == "mar-only":
        return np.where(observed, OBSERVED, MAR).astype(np.int8)
    if method == "mnar-only":
        return np.where(observed, OBSERVED, MNAR).astype(np.int8)
    profiles = build_samples(rmap)
    if method == "elkm":
        cl = elkm(profiles.matrix(), k_max or k_upper, seed)
    elif method == "akm":
        cl = akm(profiles, gammas, k_upper, seed, mnar_count, rp_index=np.flatnonzero(rmap.rp_observed), eta=eta)
    elif method == "tac":
        if topology is None:
            raise ValueError("tac needs a topology")
        cl = tac(profiles.matrix(), profiles.locations, topology)
    else:
        raise ValueError(f"unknown differentiation method {method!r}; expected one of {METHODS}")
    return differentiate(observed, cl, eta)
