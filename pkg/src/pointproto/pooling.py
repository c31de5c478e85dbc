"""Permutation-invariant reduction of per-point features to one global vector."""

import numpy as np

AGGREGATORS = ("max", "mean", "sum")


def aggregate(features: np.ndarray, op: str = "max") -> np.ndarray:
    """Collapse an (n, d) matrix to a d-vector by componentwise max/mean/sum."""
    feats = np.asarray(features, dtype=np.float64)
    if feats.ndim != 2 or feats.shape[0] == 0:
        raise ValueError("aggregate expects a non-empty (n, d) matrix")
    if op == "max":
        return feats.max(axis=0)
    if op == "mean":
        return feats.mean(axis=0)
    if op == "sum":
        return feats.sum(axis=0)
    raise ValueError(f"unknown aggregator {op!r}; expected one of {AGGREGATORS}")
