"""Clustering back-ends for the differentiator: k-means, elbow k-means, TAC."""
from __future__ import annotations

import heapq
import logging

import numpy as np

from .geometry import MultiPolygon, convex_hull

log = logging.getLogger(__name__)

MAX_ITER = 300
N_INIT = 10


def _dense_labels(labels: np.ndarray) -> np.ndarray:
    _, dense = np.unique(labels, return_inverse=True)
    return dense.astype(np.int64)


def _sq_dists(X: np.ndarray, C: np.ndarray) -> np.ndarray:
    diff = X[:, None, :] - C[None, :, :]
    return np.einsum("ijk,ijk->ij", diff, diff)


def _kmeanspp(X: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    n = len(X)
    chosen = [int(rng.integers(n))]
    d2 = ((X - X[chosen[0]]) ** 2).sum(axis=1)
    for _ in range(1, k):
        total = d2.sum()
        if total > 0:
            nxt = int(rng.choice(n, p=d2 / total))
        else:  # every point coincides with a chosen center
            rest = np.setdiff1d(np.arange(n), chosen)
            nxt = int(rng.choice(rest))
        chosen.append(nxt)
        d2 = np.minimum(d2, ((X - X[nxt]) ** 2).sum(axis=1))
    return X[chosen].copy()


def kmeans(samples, k: int, seed: int = 0, n_init: int = N_INIT):
    """Lloyd's k-means from k-means++ seeding.

    Each of ``n_init`` restarts runs until an assignment fixpoint or 300
    iterations; the restart with the lowest within-cluster sum of squares
    wins (earliest on ties). Ties between equidistant centers go to the
    lower center index. Returns a ``Clustering`` with dense labels (a center
    left without members is dropped).
    """
    X = np.asarray(samples, dtype=float)
    n = len(X)
    if not 1 <= k <= n:
        raise ValueError(f"k={k} outside [1, {n}]")
    if n_init < 1:
        raise ValueError("n_init must be at least 1")
    rng = np.random.default_rng(seed)
    best, best_cost = None, np.inf
    for _ in range(n_init):
        cl = _lloyd(X, k, rng)
        cost = wcss(X, cl)
        if cost < best_cost:
            best, best_cost = cl, cost
    return best


def _lloyd(X: np.ndarray, k: int, rng: np.random.Generator):
    from .differentiator import Clustering

    n = len(X)
    centers = _kmeanspp(X, k, rng)
    labels = np.full(n, -1)
    for _ in range(MAX_ITER):
        d2 = _sq_dists(X, centers)
        new = d2.argmin(axis=1)
        counts = np.bincount(new, minlength=k)
        for c in np.flatnonzero(counts == 0):
            # re-seed an empty cluster with the point farthest from its center
            far = int(d2[np.arange(n), new].argmax())
            if d2[far, new[far]] <= 0 or counts[new[far]] <= 1:
                continue
            counts[new[far]] -= 1
            new[far] = c
            counts[c] = 1
            d2[far] = 0.0
        if np.array_equal(new, labels):
            break
        labels = new
        for c in range(k):
            members = labels == c
            if members.any():
                centers[c] = X[members].mean(axis=0)
    dense = _dense_labels(labels)
    return Clustering(dense, np.array([X[dense == c].mean(axis=0) for c in range(dense.max() + 1)]))


def wcss(samples, clustering) -> float:
    X = np.asarray(samples, dtype=float)
    total = 0.0
    for members in clustering.members():
        pts = X[members]
        total += float(((pts - pts.mean(axis=0)) ** 2).sum())
    return total


def elbow_index(curve) -> int:
    """Index of the point farthest from the chord joining the curve's ends.

    Both axes are rescaled to [0, 1] first; ties go to the smallest index.
    """
    y = np.asarray(curve, dtype=float)
    if len(y) <= 2:
        return 0 if len(y) < 2 or y[0] <= y[-1] else int(np.argmin(y))
    x = np.linspace(0.0, 1.0, len(y))
    span = y.max() - y.min()
    if span == 0:
        return 0
    yn = (y - y.min()) / span
    # distance to the line through (0, yn[0]) and (1, yn[-1])
    dy = yn[-1] - yn[0]
    dist = np.abs(dy * x - yn + yn[0]) / np.hypot(1.0, dy)
    return int(np.argmax(dist))


def elkm(samples, k_max: int, seed: int = 0):
    """k-means with k chosen by the elbow of the WCSS curve over k = 1..k_max."""
    X = np.asarray(samples, dtype=float)
    if k_max < 2:
        raise ValueError("k_max must be at least 2")
    k_max = min(k_max, len(X))
    runs = [kmeans(X, k, seed) for k in range(1, k_max + 1)]
    curve = [wcss(X, c) for c in runs]
    best = elbow_index(curve)
    log.debug("elkm: wcss=%s -> k=%d", np.round(curve, 3).tolist(), best + 1)
    return runs[best]


def tac(samples, locations, topology: MultiPolygon):
    """Topology-aware agglomerative clustering.

    Starts from singletons and repeatedly merges the two clusters whose
    location centers are closest, skipping pairs whose joint convex hull
    touches a wall or obstacle. Ends when no pair can merge.

    A blocked pair stays blocked: the hull of any superset contains the hull
    that touched a wall, so a block is inherited by every merge product.
    """
    from .differentiator import Clustering

    X = np.asarray(samples, dtype=float)
    loc = np.asarray(locations, dtype=float)
    n = len(loc)
    if n == 0:
        return Clustering(np.zeros(0, dtype=np.int64))

    members: dict[int, list[int]] = {}
    hulls: dict[int, list] = {}
    sums: dict[int, np.ndarray] = {}
    blocked: dict[int, set[int]] = {}
    for i in range(n):
        members[i] = [i]
        hulls[i] = [tuple(loc[i])]
        sums[i] = loc[i].copy()
        # a lone point sitting on a wall still forms its own cluster
        blocked[i] = set()

    def center(c):
        return sums[c] / len(members[c])

    heap: list[tuple[float, int, int]] = []
    if n > 1:
        diff = loc[:, None, :] - loc[None, :, :]
        d = np.sqrt(np.einsum("ijk,ijk->ij", diff, diff))
        iu, ju = np.triu_indices(n, 1)
        heap = list(zip(d[iu, ju].tolist(), iu.tolist(), ju.tolist()))
        heapq.heapify(heap)

    next_id = n
    merges = 0
    while heap:
        dist, a, b = heapq.heappop(heap)
        if a not in members or b not in members or b in blocked[a]:
            continue
        union_hull = convex_hull(hulls[a] + hulls[b])
        if topology.intersects(union_hull):
            blocked[a].add(b)
            blocked[b].add(a)
            continue
        c = next_id
        next_id += 1
        members[c] = members.pop(a) + members.pop(b)
        hulls[c] = union_hull
        sums[c] = sums.pop(a) + sums.pop(b)
        hulls.pop(a), hulls.pop(b)
        ba, bb = blocked.pop(a), blocked.pop(b)
        blocked[c] = {x for x in ba | bb if x in members}
        for x in blocked[c]:
            blocked[x].discard(a)
            blocked[x].discard(b)
            blocked[x].add(c)
        merges += 1
        cc = center(c)
        for other in members:
            if other != c and other not in blocked[c]:
                heapq.heappush(heap, (float(np.hypot(*(center(other) - cc))), other, c))

    labels = np.empty(n, dtype=np.int64)
    for new_id, cid in enumerate(sorted(members, key=lambda c: min(members[c]))):
        labels[members[cid]] = new_id
    log.debug("tac: %d merges, %d clusters", merges, len(members))
    centers = np.array([X[labels == c].mean(axis=0) for c in range(len(members))]) if X.size else None
    return Clustering(labels, centers)
