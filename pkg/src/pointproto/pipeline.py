"""End-to-end feature extraction: cloud -> k-NN graph -> descriptors ->
mean-deviation lift -> pooled global feature."""

import numpy as np

from .cloudio import PointCloud, subsample
from .descriptors import local_descriptors
from .laplace import laplace_lift
from .neighbors import knn_kdtree
from .pooling import aggregate

STAGES = ("psi", "lpsi", "lp")


def per_point_features(cloud: PointCloud, k: int, stage: str = "lpsi") -> np.ndarray:
    """Per-point feature matrix for one pipeline stage.

    Stages: "psi" -> the 15-wide local descriptors, "lpsi" -> their 30-wide
    lift (the network input), "lp" -> the 6-wide lift of raw coordinates
    (edge/corner visualization).
    """
    graph = knn_kdtree(cloud, k)
    if stage == "lp":
        return laplace_lift(cloud.points, graph)
    descriptors = local_descriptors(cloud, graph)
    if stage == "psi":
        return descriptors
    if stage == "lpsi":
        return laplace_lift(descriptors, graph)
    raise ValueError(f"unknown stage {stage!r}; expected one of {STAGES}")


def global_feature(
    cloud: PointCloud,
    k: int,
    aggregator: str = "max",
    use_laplace: bool = True,
) -> np.ndarray:
    """Pool a cloud into one global vector (30-wide, or 15-wide without the lift)."""
    graph = knn_kdtree(cloud, k)
    features = local_descriptors(cloud, graph)
    if use_laplace:
        features = laplace_lift(features, graph)
    return aggregate(features, aggregator)


def dataset_features(clouds, cfg, seed: int = 0):
    """Featurize a list of labelled clouds into a (m, d) table plus labels.

    Clouds larger than cfg.points_per_cloud are subsampled first with an RNG
    derived from (seed, position), so the table is reproducible and stable
    under re-runs; exact-size clouds pass through untouched.
    """
    rows = []
    labels = []
    for i, cloud in enumerate(clouds):
        if len(cloud) < cfg.points_per_cloud:
            raise ValueError(
                f"cloud {cloud.source_id or i} has {len(cloud)} points, "
                f"config needs {cfg.points_per_cloud}"
            )
        if len(cloud) > cfg.points_per_cloud:
            rng = np.random.default_rng(np.random.SeedSequence([seed, i]))
            cloud = subsample(cloud, cfg.points_per_cloud, rng)
        rows.append(global_feature(cloud, cfg.k_neighbors, cfg.aggregator, cfg.use_laplace))
        labels.append(cloud.label)
    return np.stack(rows), np.asarray(labels)
