"""Exact neighbor queries: nearest, k-nearest, ball query and farthest-point sampling.

All distances are unsquared Euclidean, accumulated coordinate by coordinate
in a fixed order so that every code path (dense kernels, the tree-backed
index, the test oracles) produces bit-identical values. Ties always go to
the lowest point index.
"""

from __future__ import annotations

import numpy as np
from scipy.spatial import cKDTree

from .autodiff import ContractError, DimensionError

# rows per block for dense distance matrices, keeps peak memory near 64 MB
_BLOCK_ELEMS = 1 << 23


def pairwise_distances(q: np.ndarray, p: np.ndarray) -> np.ndarray:
    """Dense (..., m, n) distance matrix between queries ``q`` (..., m, d) and points ``p`` (..., n, d)."""
    sq = np.subtract(q[..., :, None, 0], p[..., None, :, 0])
    np.multiply(sq, sq, out=sq)
    if q.shape[-1] > 1:
        buf = np.empty_like(sq)
        for j in range(1, q.shape[-1]):
            np.subtract(q[..., :, None, j], p[..., None, :, j], out=buf)
            np.multiply(buf, buf, out=buf)
            sq += buf
    return np.sqrt(sq, out=sq)


def smallest_k(d: np.ndarray, k: int) -> np.ndarray:
    """Column indices of the ``k`` smallest entries per row, ordered by (value, index).

    Equivalent to a stable argsort truncated to ``k`` columns, but uses a
    partial partition; rows with a tie straddling the cut fall back to the
    full stable sort.
    """
    n = d.shape[-1]
    if k >= n or n <= 16:
        return np.argsort(d, axis=-1, kind="stable")[..., :k]
    part = np.argpartition(d, k - 1, axis=-1)[..., :k]
    part.sort(axis=-1)
    vals = np.take_along_axis(d, part, axis=-1)
    cut = vals.max(axis=-1, keepdims=True)
    ties = (d <= cut).sum(axis=-1) != k
    order = np.argsort(vals, axis=-1, kind="stable")
    out = np.take_along_axis(part, order, axis=-1)
    if np.any(ties):
        out[ties] = np.argsort(d[ties], axis=-1, kind="stable")[..., :k]
    return out


def point_distances(q: np.ndarray, p: np.ndarray) -> np.ndarray:
    """Distances between matching rows of ``q`` and ``p`` (broadcasting over leading axes)."""
    diff = q[..., 0] - p[..., 0]
    sq = diff * diff
    for j in range(1, q.shape[-1]):
        diff = q[..., j] - p[..., j]
        sq = sq + diff * diff
    return np.sqrt(sq)


def _check_dims(q: np.ndarray, p: np.ndarray) -> None:
    if q.shape[-1] != p.shape[-1]:
        raise DimensionError(f"query dim {q.shape[-1]} does not match set dim {p.shape[-1]}")


def _blocks(m: int, n: int):
    step = max(1, _BLOCK_ELEMS // max(n, 1))
    for start in range(0, m, step):
        yield slice(start, min(m, start + step))


def nearest_many(queries: np.ndarray, points: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Index of and distance to the closest point for every query row (dense, blocked)."""
    queries = np.asarray(queries, dtype=np.float64)
    points = np.asarray(points, dtype=np.float64)
    _check_dims(queries, points)
    if len(points) == 0:
        raise ContractError("nearest query against an empty set")
    idx = np.empty(len(queries), dtype=np.int64)
    dist = np.empty(len(queries))
    for sl in _blocks(len(queries), len(points)):
        d = pairwise_distances(queries[sl], points)
        a = np.argmin(d, axis=1)
        idx[sl] = a
        dist[sl] = d[np.arange(len(a)), a]
    return idx, dist


def knn_many(
    queries: np.ndarray, points: np.ndarray, k: int, exclude_self: bool = False
) -> tuple[np.ndarray, np.ndarray]:
    """The ``k`` closest points for each query, sorted by (distance, index).

    With ``exclude_self`` candidates at distance exactly zero are skipped. The
    effective ``k`` is the smallest candidate count over all queries, so the
    result is rectangular.
    """
    queries = np.asarray(queries, dtype=np.float64)
    points = np.asarray(points, dtype=np.float64)
    _check_dims(queries, points)
    if k < 1:
        raise ContractError("k must be >= 1")
    d = pairwise_distances(queries, points)
    if exclude_self:
        d = np.where(d == 0.0, np.inf, d)
        avail = int(np.isfinite(d).sum(axis=1).min()) if len(queries) else len(points)
    else:
        avail = len(points)
    k_eff = min(k, avail)
    if k_eff < 1:
        raise ContractError("no neighbor candidates remain after excluding coincident points")
    order = smallest_k(d, k_eff)
    return order, np.take_along_axis(d, order, axis=1)


class SpatialIndex:
    """Immutable exact index over a point set.

    A kd-tree narrows candidates; final ordering is recomputed with
    :func:`point_distances` so results match a linear scan exactly.
    """

    def __init__(self, points):
        pts = np.array(points, dtype=np.float64)
        if pts.ndim != 2 or len(pts) == 0:
            raise ContractError("SpatialIndex needs a non-empty (n, dim) array")
        if not np.all(np.isfinite(pts)):
            raise ContractError("SpatialIndex points must be finite")
        pts.setflags(write=False)
        self.points = pts
        self.dim = pts.shape[1]
        self._tree = cKDTree(pts)

    def __len__(self) -> int:
        return len(self.points)

    def _q(self, q) -> np.ndarray:
        q = np.asarray(q, dtype=np.float64).reshape(-1)
        if q.shape[0] != self.dim:
            raise DimensionError(f"query dim {q.shape[0]} does not match set dim {self.dim}")
        return q

    def _within(self, q: np.ndarray, r: float, exact: bool = True) -> tuple[np.ndarray, np.ndarray]:
        # widened radius: the tree's own rounding may differ from ours in the last ulp
        cand = np.asarray(self._tree.query_ball_point(q, r * (1 + 1e-9) + 1e-300), dtype=np.int64)
        cand.sort()
        d = point_distances(q[None, :], self.points[cand])
        if exact:
            keep = d <= r
            cand, d = cand[keep], d[keep]
        order = np.lexsort((cand, d))
        return cand[order], d[order]

    def _sorted_candidates(self, q: np.ndarray, count: int, exclude_self: bool) -> tuple[np.ndarray, np.ndarray]:
        n = len(self.points)
        want = min(n, count)
        while True:
            dd, _ = self._tree.query(q, k=want)
            dd = np.atleast_1d(dd)
            cand, d = self._within(q, float(dd[-1]), exact=False)
            if exclude_self:
                keep = d != 0.0
                cand, d = cand[keep], d[keep]
            if len(cand) >= count or want == n:
                return cand, d
            want = min(n, want * 2)

    def nearest(self, q) -> tuple[int, float]:
        q = self._q(q)
        cand, d = self._sorted_candidates(q, 1, False)
        return int(cand[0]), float(d[0])

    def knn(self, q, k: int, exclude_self: bool = False) -> list[tuple[int, float]]:
        if k < 1:
            raise ContractError("k must be >= 1")
        q = self._q(q)
        cand, d = self._sorted_candidates(q, k, exclude_self)
        if len(cand) == 0:
            raise ContractError("no neighbor candidates remain after exclusion")
        return [(int(i), float(x)) for i, x in zip(cand[:k], d[:k])]

    def ball_query(self, center, r: float, cap: int) -> list[int]:
        if r <= 0 or cap < 1:
            raise ContractError("ball_query needs r > 0 and cap >= 1")
        q = self._q(center)
        cand, _ = self._within(q, r)
        if len(cand) == 0:
            return [self.nearest(q)[0]] * cap
        chosen = list(cand[:cap].tolist())
        return chosen + [chosen[0]] * (cap - len(chosen))


def nearest(index: SpatialIndex, q) -> tuple[int, float]:
    return index.nearest(q)


def knn(index: SpatialIndex, q, k: int, exclude_self: bool = False) -> list[tuple[int, float]]:
    return index.knn(q, k, exclude_self)


def ball_query(index: SpatialIndex, center, r: float, cap: int) -> list[int]:
    return index.ball_query(center, r, cap)


def ball_query_many(centers: np.ndarray, points: np.ndarray, r: float, cap: int) -> np.ndarray:
    """Vectorized ball query over a leading batch axis.

    ``centers`` (..., K, d), ``points`` (..., n, d) -> indices (..., K, cap) with
    the same fill rule as :meth:`SpatialIndex.ball_query`.
    """
    d = pairwise_distances(centers, points)
    take = min(cap, points.shape[-2])
    idx = smallest_k(d, take)
    inside = np.take_along_axis(d, idx, axis=-1) <= r
    # slot j keeps its index if inside r, otherwise falls back to the nearest one
    idx = np.where(inside, idx, idx[..., :1])
    if take < cap:
        pad = np.repeat(idx[..., :1], cap - take, axis=-1)
        idx = np.concatenate([idx, pad], axis=-1)
    return idx


def farthest_point_sample(points, m: int, seed_index: int = 0) -> np.ndarray:
    """Greedy max-min selection of ``m`` indices starting at ``seed_index``.

    ``points`` may carry a leading batch axis, in which case ``seed_index``
    may be an array with one seed per batch element.
    """
    pts = np.asarray(points, dtype=np.float64)
    batched = pts.ndim == 3
    if not batched:
        pts = pts[None]
    b, n, _ = pts.shape
    if not 1 <= m <= n:
        raise ContractError(f"farthest_point_sample needs 1 <= m <= n, got m={m}, n={n}")
    seeds = np.broadcast_to(np.asarray(seed_index, dtype=np.int64), (b,))
    if np.any(seeds < 0) or np.any(seeds >= n):
        raise ContractError(f"seed index out of range [0, {n})")
    rows = np.arange(b)
    out = np.empty((b, m), dtype=np.int64)
    out[:, 0] = seeds
    mind = point_distances(pts, pts[rows, seeds][:, None, :])
    # chosen points drop to -1 so duplicates never get picked twice
    mind[rows, seeds] = -1.0
    for j in range(1, m):
        nxt = np.argmax(mind, axis=1)
        out[:, j] = nxt
        mind = np.minimum(mind, point_distances(pts, pts[rows, nxt][:, None, :]))
        mind[rows, nxt] = -1.0
    return out if batched else out[0]
