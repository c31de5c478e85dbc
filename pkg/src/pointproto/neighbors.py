"""Exact k-nearest-neighbour tables over point clouds.

Two constructions with an identical contract: a brute-force oracle and a
kd-tree fast path. Both order each row by ascending Euclidean distance with
exact ties broken by ascending point index, and both exclude the query point
from its own row.
"""

from dataclasses import dataclass

import numpy as np
from scipy.spatial import cKDTree

from .cloudio import PointCloud


@dataclass
class NeighborGraph:
    """Per-point neighbour table.

    `indices[i]` lists the k nearest points to point i (self excluded) by
    ascending distance, ties by ascending index; `distances[i]` matches.
    """

    k: int
    indices: np.ndarray
    distances: np.ndarray


def _check_k(n: int, k: int) -> None:
    if not 1 <= k <= n - 1:
        raise ValueError(f"k={k} out of range for a cloud of {n} points (need 1 <= k <= n-1)")


def _row_distances(points: np.ndarray, i: int) -> np.ndarray:
    d = np.sqrt(((points - points[i]) ** 2).sum(axis=-1))
    d[i] = np.inf
    return d


def knn_bruteforce(cloud: PointCloud, k: int) -> NeighborGraph:
    """Exact k-NN via the full pairwise distance matrix (the oracle path).

    Memory is O(n^2); intended for clouds up to a few thousand points.
    """
    points = cloud.points
    n = len(points)
    _check_k(n, k)
    d = np.sqrt(((points[:, None, :] - points[None, :, :]) ** 2).sum(axis=-1))
    np.fill_diagonal(d, np.inf)
    # stable sort keeps ascending column index within exact distance ties
    order = np.argsort(d, axis=1, kind="stable")[:, :k]
    rows = np.arange(n)[:, None]
    return NeighborGraph(k, order.astype(np.int64), d[rows, order])


def knn_kdtree(cloud: PointCloud, k: int) -> NeighborGraph:
    """Exact k-NN via a kd-tree, contract-identical to knn_bruteforce.

    Candidate distances are recomputed with the same arithmetic as the
    brute-force path so tie handling matches bit for bit; rows whose
    candidate window cuts through a distance tie (or is flooded by
    duplicates) fall back to an exact single-row scan.
    """
    points = cloud.points
    n = len(points)
    _check_k(n, k)
    tree = cKDTree(points)
    kq = min(n, k + 2)
    _, cand = tree.query(points, k=kq)
    cand = cand.astype(np.int64)

    d = np.sqrt(((points[:, None, :] - points[cand]) ** 2).sum(axis=-1))
    self_mask = cand == np.arange(n)[:, None]
    d = np.where(self_mask, np.inf, d)
    # rows where the query point itself fell outside the candidate window
    # (possible when > kq duplicates coincide) need the exact fallback
    needs_rescan = ~self_mask.any(axis=1)

    sort_key = np.where(self_mask, n, cand)
    order = np.lexsort((sort_key, d), axis=-1)
    rows = np.arange(n)[:, None]
    top = order[:, :k]
    indices = cand[rows, top]
    distances = d[rows, top]

    if kq - 1 > k:
        # a tie crossing the keep/drop boundary means the window may have
        # truncated an index-tie group: rescan those rows exactly
        next_d = d[np.arange(n), order[:, k]]
        needs_rescan |= next_d == distances[:, -1]

    for i in np.nonzero(needs_rescan)[0]:
        row = _row_distances(points, i)
        keep = np.argsort(row, kind="stable")[:k]
        indices[i] = keep
        distances[i] = row[keep]
    return NeighborGraph(k, indices, distances)


def write_graph_csv(graph: NeighborGraph, path) -> None:
    """Dump the index table, one row of k neighbour indices per point."""
    with open(path, "w") as handle:
        for row in graph.indices:
            handle.write(",".join(str(int(j)) for j in row) + "\n")
