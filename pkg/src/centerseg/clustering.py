"""Clustering of 2-D vote positions.

The default clusterer is DBSCAN backed by a uniform hash grid whose cell
size equals the query radius, so a radius query only inspects the 3x3
cell neighborhood. ``dbscan_naive`` is an independent O(n^2) reference
implementation with the same deterministic contract; the two must agree
bit for bit.

Determinism rules, shared by both DBSCAN variants:
  - points are scanned in ascending index order,
  - cluster expansion uses a FIFO queue,
  - neighbor lists are in ascending index order,
  - neighborhoods are closed balls (distance <= radius counts),
so border points always join the first cluster that reaches them.
"""

from __future__ import annotations

from collections import defaultdict, deque
from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True, eq=False)
class ClusterLabels:
    """Per-point group labels: 0 = noise/unassigned, 1..n_groups = clusters."""

    labels: np.ndarray
    n_groups: int

    def __post_init__(self) -> None:
        lab = np.asarray(self.labels, dtype=np.int64)
        if lab.ndim != 1:
            raise ValueError("labels must be 1-D")
        if lab.size:
            if lab.min() < 0 or lab.max() > self.n_groups:
                raise ValueError("labels must lie in [0, n_groups]")
            present = np.unique(lab[lab > 0])
            if present.size != self.n_groups:
                raise ValueError("every group in 1..n_groups must be non-empty")
        elif self.n_groups != 0:
            raise ValueError("empty label list cannot have groups")
        lab.flags.writeable = False
        object.__setattr__(self, "labels", lab)

    def __len__(self) -> int:
        return int(self.labels.size)

    def __eq__(self, other) -> bool:
        if not isinstance(other, ClusterLabels):
            return NotImplemented
        return self.n_groups == other.n_groups and np.array_equal(self.labels, other.labels)


def _as_points(points) -> np.ndarray:
    pts = np.asarray(points, dtype=np.float64)
    if pts.size == 0:
        return pts.reshape(0, 2)
    if pts.ndim != 2 or pts.shape[1] != 2:
        raise ValueError("points must have shape (n, 2)")
    return pts


class GridIndex:
    """Uniform hash grid over 2-D points; cell size equals the query radius."""

    def __init__(self, points, cell_size: float):
        if cell_size <= 0:
            raise ValueError("cell_size must be > 0")
        pts = _as_points(points)
        self.cell_size = float(cell_size)
        self.xs = pts[:, 0].copy()
        self.ys = pts[:, 1].copy()
        cells = defaultdict(list)
        cx = np.floor(self.xs / self.cell_size).astype(np.int64)
        cy = np.floor(self.ys / self.cell_size).astype(np.int64)
        for i in range(pts.shape[0]):
            cells[(int(cx[i]), int(cy[i]))].append(i)
        self.cells = {key: np.asarray(idx, dtype=np.int64) for key, idx in cells.items()}

    def __len__(self) -> int:
        return self.xs.size

    def candidates(self, x: float, y: float) -> np.ndarray:
        """Point indices in the 3x3 cell neighborhood of (x, y)."""
        cx = int(np.floor(x / self.cell_size))
        cy = int(np.floor(y / self.cell_size))
        chunks = []
        for dy in (-1, 0, 1):
            for dx in (-1, 0, 1):
                got = self.cells.get((cx + dx, cy + dy))
                if got is not None:
                    chunks.append(got)
        if not chunks:
            return np.empty(0, dtype=np.int64)
        return np.concatenate(chunks)


def radius_neighbors(index: GridIndex, query, r: float) -> np.ndarray:
    """Indices of all points within distance r of ``query``, ascending.

    ``r`` must equal the index cell size; the 3x3 neighborhood guarantee
    only holds for that radius.
    """
    if r != index.cell_size:
        raise ValueError(f"query radius {r} does not match index cell size {index.cell_size}")
    qx, qy = float(query[0]), float(query[1])
    cand = index.candidates(qx, qy)
    if cand.size == 0:
        return cand
    dx = index.xs[cand] - qx
    dy = index.ys[cand] - qy
    hit = cand[dx * dx + dy * dy <= r * r]
    return np.sort(hit)


def neighbor_counts(points, radius: float) -> np.ndarray:
    """Number of points within ``radius`` of each point, including itself.

    Batched per grid cell so dense clouds do not pay a per-point python
    loop; results match an exhaustive pairwise scan exactly.
    """
    pts = _as_points(points)
    n = pts.shape[0]
    counts = np.zeros(n, dtype=np.int64)
    if n == 0:
        return counts
    index = GridIndex(pts, radius)
    r2 = radius * radius
    for (cx, cy), members in index.cells.items():
        chunks = []
        for dy in (-1, 0, 1):
            for dx in (-1, 0, 1):
                got = index.cells.get((cx + dx, cy + dy))
                if got is not None:
                    chunks.append(got)
        cand = np.concatenate(chunks)
        cand_x = index.xs[cand]
        cand_y = index.ys[cand]
        # chunk the member rows to bound the distance-matrix size
        for lo in range(0, members.size, 512):
            rows = members[lo : lo + 512]
            dxm = pts[rows, 0][:, None] - cand_x[None, :]
            dym = pts[rows, 1][:, None] - cand_y[None, :]
            counts[rows] = ((dxm * dxm + dym * dym) <= r2).sum(axis=1)
    return counts


def _eps_adjacency(pts: np.ndarray, index: GridIndex, eps: float) -> list[np.ndarray]:
    """Per-point neighbor lists (ascending, self included) within eps.

    Built cell by cell against the 3x3 candidate neighborhood, with the
    member rows chunked to bound the distance-matrix size.
    """
    n = pts.shape[0]
    eps2 = eps * eps
    nbrs: list[np.ndarray] = [None] * n  # type: ignore[list-item]
    for (cx, cy), members in index.cells.items():
        chunks = []
        for dy in (-1, 0, 1):
            for dx in (-1, 0, 1):
                got = index.cells.get((cx + dx, cy + dy))
                if got is not None:
                    chunks.append(got)
        cand = np.sort(np.concatenate(chunks))
        cand_x = index.xs[cand]
        cand_y = index.ys[cand]
        for lo in range(0, members.size, 512):
            rows = members[lo : lo + 512]
            dxm = pts[rows, 0][:, None] - cand_x[None, :]
            dym = pts[rows, 1][:, None] - cand_y[None, :]
            hit = (dxm * dxm + dym * dym) <= eps2
            for k in range(rows.size):
                nbrs[int(rows[k])] = cand[hit[k]]
    return nbrs


def dbscan(points, eps: float, min_pts: int) -> ClusterLabels:
    """Density clustering with grid-indexed radius queries.

    A point is core iff at least ``min_pts`` points (itself included) lie
    within ``eps``; clusters are maximal density-connected sets; points
    that are neither core nor reachable keep label 0.

    Neighbor lists are precomputed in one batched pass and the expansion
    enqueues each point at most once; both are pure optimizations, the
    output is bit-identical to :func:`dbscan_naive` (clusters numbered
    by seed scan order, border points claimed by the first cluster that
    reaches them).
    """
    if eps <= 0:
        raise ValueError("eps must be > 0")
    if min_pts < 1:
        raise ValueError("min_pts must be >= 1")
    pts = _as_points(points)
    n = pts.shape[0]
    labels = np.zeros(n, dtype=np.int64)
    if n == 0:
        return ClusterLabels(labels, 0)
    index = GridIndex(pts, eps)
    nbrs = _eps_adjacency(pts, index, eps)
    core = np.fromiter((a.size for a in nbrs), dtype=np.int64, count=n) >= min_pts
    seen = np.zeros(n, dtype=bool)
    cluster = 0
    for i in range(n):
        if seen[i]:
            continue
        seen[i] = True
        if not core[i]:
            continue
        cluster += 1
        labels[i] = cluster
        queue = deque((i,))
        while queue:
            j = queue.popleft()
            if not core[j]:
                continue
            jn = nbrs[j]
            unclaimed = jn[labels[jn] == 0]
            labels[unclaimed] = cluster
            fresh = jn[~seen[jn]]
            seen[fresh] = True
            queue.extend(fresh.tolist())
    return ClusterLabels(labels, cluster)


def dbscan_naive(points, eps: float, min_pts: int) -> ClusterLabels:
    """Reference DBSCAN with exhaustive pairwise distances.

    Same contract and deterministic ordering as :func:`dbscan`; kept as a
    fully independent implementation so the two can cross-check each
    other bit for bit.
    """
    if eps <= 0:
        raise ValueError("eps must be > 0")
    if min_pts < 1:
        raise ValueError("min_pts must be >= 1")
    pts = _as_points(points)
    n = pts.shape[0]
    if n == 0:
        return ClusterLabels(np.zeros(0, dtype=np.int64), 0)
    xs = pts[:, 0]
    ys = pts[:, 1]
    eps2 = eps * eps

    def scan(q: int) -> np.ndarray:
        dx = xs - xs[q]
        dy = ys - ys[q]
        return np.flatnonzero(dx * dx + dy * dy <= eps2)

    labels = [0] * n
    processed = [False] * n
    cluster = 0
    for i in range(n):
        if processed[i]:
            continue
        processed[i] = True
        neigh = scan(i)
        if neigh.size < min_pts:
            continue
        cluster += 1
        labels[i] = cluster
        fifo = [int(j) for j in neigh]
        k = 0
        while k < len(fifo):
            j = fifo[k]
            k += 1
            if labels[j] == 0:
                labels[j] = cluster
            if processed[j]:
                continue
            processed[j] = True
            jn = scan(j)
            if jn.size >= min_pts:
                fifo.extend(int(m) for m in jn)
    return ClusterLabels(np.asarray(labels, dtype=np.int64), cluster)


def _flat_window_means(
    modes: np.ndarray, pts: np.ndarray, pts_sq: np.ndarray, bw2: float
) -> np.ndarray:
    """Mean of the points within sqrt(bw2) of each mode row (flat kernel).

    Distances are computed against the full point set in row chunks,
    via the |a-b|^2 = |a|^2 + |b|^2 - 2ab expansion so the inner loop is
    a matrix product. A mode with an empty window (cannot happen when
    modes start on data points, guarded anyway) stays put.
    """
    out = np.empty_like(modes)
    for lo in range(0, modes.shape[0], 512):
        block = modes[lo : lo + 512]
        block_sq = (block * block).sum(axis=1)
        d2 = block @ pts.T
        d2 *= -2.0
        d2 += block_sq[:, None]
        d2 += pts_sq[None, :]
        within = d2 <= bw2
        cnt = within.sum(axis=1)
        sums = within @ pts
        keep = cnt == 0
        cnt = np.where(keep, 1, cnt)
        means = sums / cnt[:, None]
        means[keep] = block[keep]
        out[lo : lo + 512] = means
    return out


def mean_shift(
    points,
    bandwidth: float = 10.0,
    max_iter: int = 300,
    shift_tol: float = 1e-3,
    merge_radius: float | None = None,
) -> ClusterLabels:
    """Flat-kernel mean-shift mode seeking.

    Every point is iteratively moved to the mean of the original points
    within ``bandwidth`` of it until the shift falls below ``shift_tol``
    or ``max_iter`` is hit. Converged modes within ``merge_radius``
    (default bandwidth / 2) merge into one group, scanning points in
    ascending order; every point gets its mode's label, so there is no
    noise label. Neighbor search is a deliberate exhaustive scan; this is
    the slow quadratic baseline the grid-indexed DBSCAN is measured
    against.
    """
    if bandwidth <= 0:
        raise ValueError("bandwidth must be > 0")
    if merge_radius is None:
        merge_radius = bandwidth / 2.0
    pts = _as_points(points)
    n = pts.shape[0]
    if n == 0:
        return ClusterLabels(np.zeros(0, dtype=np.int64), 0)
    bw2 = bandwidth * bandwidth
    modes = pts.copy()
    pts_sq = (pts * pts).sum(axis=1)
    active = np.arange(n)
    for _ in range(max_iter):
        if active.size == 0:
            break
        shifted = _flat_window_means(modes[active], pts, pts_sq, bw2)
        moved = np.hypot(shifted[:, 0] - modes[active, 0], shifted[:, 1] - modes[active, 1])
        modes[active] = shifted
        active = active[moved >= shift_tol]
    labels = np.zeros(n, dtype=np.int64)
    reps: list[np.ndarray] = []
    merge2 = merge_radius * merge_radius
    for i in range(n):
        if reps:
            rep_arr = np.asarray(reps)
            d2 = (rep_arr[:, 0] - modes[i, 0]) ** 2 + (rep_arr[:, 1] - modes[i, 1]) ** 2
            j = int(np.argmin(d2))
            if d2[j] <= merge2:
                labels[i] = j + 1
                continue
        reps.append(modes[i])
        labels[i] = len(reps)
    return ClusterLabels(labels, len(reps))
