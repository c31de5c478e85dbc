"""Per-point local geometric descriptors.

Each point gets a 15-wide row of five 3-vector blocks: its position, unit
edge vectors to its two nearest neighbours, their raw cross product (an
unnormalized normal whose magnitude carries the edge angle), and the
per-coordinate population standard deviation of the full k-neighbourhood.
"""

import numpy as np

from .cloudio import PointCloud
from .neighbors import NeighborGraph

WIDTH = 15
POSITION = slice(0, 3)
EDGE1 = slice(3, 6)
EDGE2 = slice(6, 9)
NORMAL = slice(9, 12)
SPREAD = slice(12, 15)

ZERO_GUARD = 1e-12


def unit_rows(vectors: np.ndarray) -> np.ndarray:
    """Row-normalize; rows shorter than the zero guard become zero vectors."""
    norms = np.linalg.norm(vectors, axis=-1, keepdims=True)
    out = vectors / np.where(norms < ZERO_GUARD, 1.0, norms)
    out[norms[..., 0] < ZERO_GUARD] = 0.0
    return out


def local_descriptors(cloud: PointCloud, graph: NeighborGraph) -> np.ndarray:
    """Build the (n, 15) descriptor matrix [position, edge1, edge2, normal, spread].

    Args:
        cloud: the point cloud the graph was built from.
        graph: neighbour table with k >= 2; column 0/1 supply the two edges,
            all k columns supply the spread block.

    Returns:
        (n, 15) float64 matrix. Duplicate points yield zero edge vectors (and
        hence a zero normal) instead of NaNs.
    """
    if graph.k < 2:
        raise ValueError("descriptor extraction needs at least 2 neighbours per point")
    points = cloud.points
    if len(points) != graph.indices.shape[0]:
        raise ValueError(
            f"graph has {graph.indices.shape[0]} rows but cloud has {len(points)} points"
        )
    neighbours = points[graph.indices]
    edge1 = unit_rows(neighbours[:, 0] - points)
    edge2 = unit_rows(neighbours[:, 1] - points)
    normal = np.cross(edge1, edge2)
    spread = neighbours.std(axis=1)
    return np.concatenate([points, edge1, edge2, normal, spread], axis=1)
