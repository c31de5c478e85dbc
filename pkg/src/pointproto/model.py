"""Learnable core: a single affine embedding layer, class prototypes, the
episode loss, and its exact analytic backpropagation.

The layer maps pooled 30-wide geometric features to 32-wide embeddings with
no nonlinearity (992 parameters at the default widths). Episode logits are
negated distances from query embeddings to class prototypes, measured either
flat or on a Poincare ball after an origin exponential map; the loss is the
softmax cross-entropy over those logits.
"""

from dataclasses import dataclass

import numpy as np

from . import ball

IN_DIM = 30
OUT_DIM = 32

_EUCLID_GUARD = 1e-12


@dataclass(frozen=True)
class EmbeddingSpace:
    """Metric used to compare embeddings: flat, or a Poincare ball of curvature `curvature`."""

    kind: str
    curvature: float | None = None

    def __post_init__(self):
        if self.kind not in ("euclidean", "hyperbolic"):
            raise ValueError(f"unknown embedding space {self.kind!r}")
        if self.kind == "hyperbolic":
            if self.curvature is None or not (np.isfinite(self.curvature) and self.curvature > 0):
                raise ValueError("hyperbolic space needs a positive curvature")

    @classmethod
    def euclidean(cls) -> "EmbeddingSpace":
        return cls("euclidean")

    @classmethod
    def hyperbolic(cls, curvature: float = 1.0) -> "EmbeddingSpace":
        return cls("hyperbolic", float(curvature))

    @property
    def is_hyperbolic(self) -> bool:
        return self.kind == "hyperbolic"


@dataclass
class LinearLayer:
    """Affine map g -> W g + b; `weights` is (out_dim, in_dim), `bias` is (out_dim,)."""

    weights: np.ndarray
    bias: np.ndarray

    @classmethod
    def initialize(cls, in_dim: int = IN_DIM, out_dim: int = OUT_DIM, seed=0) -> "LinearLayer":
        """Fan-in uniform init on +-sqrt(1/in_dim), zero bias, seeded."""
        rng = np.random.default_rng(seed)
        bound = np.sqrt(1.0 / in_dim)
        weights = rng.uniform(-bound, bound, size=(out_dim, in_dim))
        return cls(weights, np.zeros(out_dim))

    @property
    def in_dim(self) -> int:
        return self.weights.shape[1]

    @property
    def out_dim(self) -> int:
        return self.weights.shape[0]

    def param_count(self) -> int:
        return self.weights.size + self.bias.size

    def copy(self) -> "LinearLayer":
        return LinearLayer(self.weights.copy(), self.bias.copy())


def forward(features: np.ndarray, layer: LinearLayer) -> np.ndarray:
    """Embed one feature vector or a batch of rows."""
    feats = np.asarray(features, dtype=np.float64)
    if feats.shape[-1] != layer.in_dim:
        raise ValueError(f"feature width {feats.shape[-1]} does not match layer input {layer.in_dim}")
    return feats @ layer.weights.T + layer.bias


@dataclass
class Prototype:
    """Per-class mean of support embeddings, in pre-projection (flat) coordinates."""

    class_id: int
    coords: np.ndarray


def compute_prototypes(embeddings: np.ndarray, labels) -> list[Prototype]:
    """Average support embeddings per class, ordered by ascending class id."""
    embeddings = np.asarray(embeddings, dtype=np.float64)
    labels = np.asarray(labels)
    if len(labels) != len(embeddings):
        raise ValueError("one label per support embedding required")
    if len(labels) == 0:
        raise ValueError("cannot build prototypes from an empty support set")
    return [
        Prototype(int(cid), embeddings[labels == cid].mean(axis=0))
        for cid in np.unique(labels)
    ]


def _proto_matrix(prototypes: list[Prototype]):
    if not prototypes:
        raise ValueError("at least one prototype required")
    ordered = sorted(prototypes, key=lambda p: p.class_id)
    ids = np.array([p.class_id for p in ordered], dtype=np.int64)
    coords = np.stack([p.coords for p in ordered])
    return ids, coords


def _distance_matrix(queries: np.ndarray, protos: np.ndarray, space: EmbeddingSpace) -> np.ndarray:
    if space.is_hyperbolic:
        c = space.curvature
        on_ball_q = ball.exp_map_origin(queries, c)
        on_ball_p = ball.exp_map_origin(protos, c)
        return ball.poincare_distance(on_ball_q[:, None, :], on_ball_p[None, :, :], c)
    diff = queries[:, None, :] - protos[None, :, :]
    return np.sqrt((diff**2).sum(axis=-1))


def _logsumexp(rows: np.ndarray) -> np.ndarray:
    m = rows.max(axis=1, keepdims=True)
    return m[:, 0] + np.log(np.exp(rows - m).sum(axis=1))


def _targets(ids: np.ndarray, labels: np.ndarray) -> np.ndarray:
    cols = np.searchsorted(ids, labels)
    bad = (cols >= len(ids)) | (ids[np.minimum(cols, len(ids) - 1)] != labels)
    if bad.any():
        missing = sorted(set(np.asarray(labels)[bad].tolist()))
        raise ValueError(f"query classes {missing} have no prototype")
    return cols


def episode_loss(
    prototypes: list[Prototype],
    query_embeddings: np.ndarray,
    query_labels,
    space: EmbeddingSpace,
):
    """Episode objective and logits.

    logits[q, k] = -d(embedding_q, prototype_k) with prototype columns in
    ascending class-id order; the loss is the mean over queries of
    d(own prototype) + logsumexp(-d), i.e. softmax cross-entropy over the
    logits.

    Returns:
        (loss, logits) with logits shaped (n_queries, n_classes).
    """
    queries = np.atleast_2d(np.asarray(query_embeddings, dtype=np.float64))
    labels = np.asarray(query_labels)
    if len(labels) != len(queries):
        raise ValueError("one label per query embedding required")
    if len(queries) == 0:
        raise ValueError("episode needs at least one query")
    ids, protos = _proto_matrix(prototypes)
    targets = _targets(ids, labels)
    dist = _distance_matrix(queries, protos, space)
    logits = -dist
    lse = _logsumexp(logits)
    loss = float((dist[np.arange(len(queries)), targets] + lse).mean())
    return loss, logits


def episode_backward(
    support_features: np.ndarray,
    support_labels,
    query_features: np.ndarray,
    query_labels,
    layer: LinearLayer,
    space: EmbeddingSpace,
):
    """Loss, logits, and exact parameter gradients for one episode.

    The gradient chain runs pooled features -> affine layer -> (exp map ->)
    distances -> softmax cross-entropy, including the support-side paths
    through the prototypes. Coincident query/prototype pairs contribute zero
    gradient (distance is non-differentiable there).

    Returns:
        (loss, logits, grad_weights, grad_bias).
    """
    sup = np.atleast_2d(np.asarray(support_features, dtype=np.float64))
    qry = np.atleast_2d(np.asarray(query_features, dtype=np.float64))
    sup_labels = np.asarray(support_labels)
    qry_labels = np.asarray(query_labels)

    emb_s = forward(sup, layer)
    emb_q = forward(qry, layer)
    prototypes = compute_prototypes(emb_s, sup_labels)
    ids, protos = _proto_matrix(prototypes)
    targets = _targets(ids, qry_labels)
    counts = np.array([(sup_labels == cid).sum() for cid in ids], dtype=np.float64)

    if space.is_hyperbolic:
        c = space.curvature
        on_ball_q = ball.exp_map_origin(emb_q, c)
        on_ball_p = ball.exp_map_origin(protos, c)
        dist, grad_q_pair, grad_p_pair = ball.cross_distance_grads(on_ball_q, on_ball_p, c)
    else:
        diff = emb_q[:, None, :] - protos[None, :, :]
        dist = np.sqrt((diff**2).sum(axis=-1))
        safe = np.where(dist < _EUCLID_GUARD, 1.0, dist)
        grad_q_pair = np.where(dist[..., None] < _EUCLID_GUARD, 0.0, diff / safe[..., None])
        grad_p_pair = -grad_q_pair

    logits = -dist
    lse = _logsumexp(logits)
    n_q = len(qry)
    loss = float((dist[np.arange(n_q), targets] + lse).mean())

    probs = np.exp(logits - lse[:, None])
    one_hot = np.zeros_like(probs)
    one_hot[np.arange(n_q), targets] = 1.0
    dloss_ddist = (one_hot - probs) / n_q

    d_emb_q = (dloss_ddist[..., None] * grad_q_pair).sum(axis=1)
    d_protos = (dloss_ddist[..., None] * grad_p_pair).sum(axis=0)
    if space.is_hyperbolic:
        d_emb_q = ball.exp_map_origin_jvp(emb_q, d_emb_q, space.curvature)
        d_protos = ball.exp_map_origin_jvp(protos, d_protos, space.curvature)

    # each support row of class k receives d_protos[k] / n_k through the mean
    col_of_support = _targets(ids, sup_labels)
    d_emb_s = d_protos[col_of_support] / counts[col_of_support][:, None]

    grad_weights = d_emb_q.T @ qry + d_emb_s.T @ sup
    grad_bias = d_emb_q.sum(axis=0) + d_emb_s.sum(axis=0)
    return loss, logits, grad_weights, grad_bias


def predict_batch(prototypes: list[Prototype], embeddings: np.ndarray, space: EmbeddingSpace) -> np.ndarray:
    """Nearest-prototype class ids for a batch of embeddings (ties -> lowest id)."""
    ids, protos = _proto_matrix(prototypes)
    queries = np.atleast_2d(np.asarray(embeddings, dtype=np.float64))
    dist = _distance_matrix(queries, protos, space)
    return ids[np.argmin(dist, axis=1)]


def predict(prototypes: list[Prototype], query_embedding: np.ndarray, space: EmbeddingSpace) -> int:
    """Class of the nearest prototype; exact ties go to the lowest class id."""
    return int(predict_batch(prototypes, query_embedding, space)[0])


def save_checkpoint(layer: LinearLayer, space: EmbeddingSpace, seed: int, path) -> None:
    """Write parameters as decimal text that reparses bit-for-bit."""
    lines = [
        f"dims {layer.in_dim} {layer.out_dim}",
        f"space {space.kind}",
        f"curvature {float(space.curvature)!r}" if space.is_hyperbolic else "curvature none",
        f"seed {seed}",
        "weights",
    ]
    lines += [" ".join(repr(float(v)) for v in row) for row in layer.weights]
    lines.append("bias")
    lines.append(" ".join(repr(float(v)) for v in layer.bias))
    with open(path, "w") as handle:
        handle.write("\n".join(lines) + "\n")


def load_checkpoint(path):
    """Read a checkpoint written by save_checkpoint.

    Returns:
        (layer, space, seed).
    """
    with open(path) as handle:
        lines = [ln.strip() for ln in handle if ln.strip()]
    try:
        _, in_dim, out_dim = lines[0].split()
        in_dim, out_dim = int(in_dim), int(out_dim)
        kind = lines[1].split()[1]
        curv_token = lines[2].split()[1]
        seed = int(lines[3].split()[1])
        if lines[4] != "weights":
            raise ValueError
        weights = np.array(
            [[float(v) for v in lines[5 + i].split()] for i in range(out_dim)]
        )
        if lines[5 + out_dim] != "bias":
            raise ValueError
        bias = np.array([float(v) for v in lines[6 + out_dim].split()])
    except (IndexError, ValueError) as exc:
        raise ValueError(f"malformed checkpoint file {path}") from exc
    if weights.shape != (out_dim, in_dim) or bias.shape != (out_dim,):
        raise ValueError(f"checkpoint {path} dims do not match its payload")
    if kind == "hyperbolic":
        space = EmbeddingSpace.hyperbolic(float(curv_token))
    else:
        space = EmbeddingSpace.euclidean()
    return LinearLayer(weights, bias), space, seed
