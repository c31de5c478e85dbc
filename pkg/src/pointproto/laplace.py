"""Mean-deviation lifting of per-point features.

The lift doubles a feature matrix's width by appending, per point, the
arithmetic mean of the differences to its k neighbours' feature rows. On raw
coordinates this is a discrete (negated) graph-Laplacian response: near zero
on flat, evenly sampled regions and large where the neighbourhood is
one-sided, i.e. at edges and corners.
"""

import numpy as np

from .neighbors import NeighborGraph


def laplace_lift(features: np.ndarray, graph: NeighborGraph) -> np.ndarray:
    """Lift an (n, d) feature matrix to (n, 2d): [f_i, mean_j(f_j - f_i)].

    Neighbourhoods come from `graph` (coordinate-space k-NN); the deviation
    block averages exactly the k per-neighbour differences.
    """
    feats = np.asarray(features, dtype=np.float64)
    if feats.ndim != 2:
        raise ValueError("laplace_lift expects an (n, d) matrix")
    if feats.shape[0] != graph.indices.shape[0]:
        raise ValueError(
            f"feature rows ({feats.shape[0]}) do not match graph rows ({graph.indices.shape[0]})"
        )
    deviation = (feats[graph.indices] - feats[:, None, :]).mean(axis=1)
    return np.concatenate([feats, deviation], axis=1)


def base_block(lifted: np.ndarray) -> np.ndarray:
    return lifted[:, : lifted.shape[1] // 2]


def deviation_block(lifted: np.ndarray) -> np.ndarray:
    return lifted[:, lifted.shape[1] // 2 :]
