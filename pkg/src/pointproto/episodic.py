"""Episode protocol: category splits, episode sampling, the SGD training loop
with cosine learning-rate annealing, and seeded evaluation.

Training consumes a precomputed table of pooled per-cloud features: the
feature extraction is deterministic and parameter-free, so each cloud is
featurized once and episodes index into the table. One optimizer step is
taken per episode, and every random draw flows from explicit seeds, so a
(seed, config, data) triple fully determines the parameter trajectory.
"""

import math
from dataclasses import dataclass, fields

import numpy as np

from .model import (
    EmbeddingSpace,
    LinearLayer,
    compute_prototypes,
    episode_backward,
    forward,
    predict_batch,
)
from .pooling import AGGREGATORS


class NumericError(RuntimeError):
    """Training produced non-finite numbers."""


@dataclass(frozen=True)
class SplitSpec:
    """Disjoint, exhaustive category partition, reproducible from its seed."""

    train_categories: tuple
    test_categories: tuple
    seed: int


def make_split(category_ids, n_train: int, seed: int) -> SplitSpec:
    """Randomly partition categories into n_train train and the rest test."""
    cats = sorted(set(category_ids))
    if not 0 < n_train < len(cats):
        raise ValueError(f"n_train={n_train} out of range for {len(cats)} categories")
    rng = np.random.default_rng(seed)
    perm = rng.permutation(len(cats))
    train = tuple(sorted(cats[i] for i in perm[:n_train]))
    test = tuple(sorted(cats[i] for i in perm[n_train:]))
    return SplitSpec(train, test, seed)


_SPACE_ALIASES = {
    "euc": "euclidean",
    "euclidean": "euclidean",
    "hyp": "hyperbolic",
    "hyperbolic": "hyperbolic",
}


@dataclass
class TrainConfig:
    """The full training recipe; defaults follow the reference protocol
    (5-way 10-shot 20-query episodes of 512-point clouds, k=40, 50 epochs of
    4 episodes, cosine lr 0.1 -> 0.001, SGD momentum 0.9, weight decay 1e-4).
    """

    epochs: int = 50
    train_episodes_per_epoch: int = 4
    test_episodes: int = 300
    ways: int = 5
    shots: int = 10
    queries_per_way: int = 20
    lr_max: float = 0.1
    lr_min: float = 0.001
    momentum: float = 0.9
    weight_decay: float = 1e-4
    points_per_cloud: int = 512
    k_neighbors: int = 40
    aggregator: str = "max"
    space: str = "hyperbolic"
    curvature: float = 1.0
    seeds: int = 6
    # 0 means: no category split, train on every category in the data
    train_category_count: int = 0
    use_laplace: bool = True

    def __post_init__(self):
        if self.space in _SPACE_ALIASES:
            self.space = _SPACE_ALIASES[self.space]

    def validate(self) -> None:
        positive = (
            "epochs", "train_episodes_per_epoch", "test_episodes", "ways",
            "shots", "queries_per_way", "lr_max", "lr_min", "momentum",
            "points_per_cloud", "k_neighbors", "seeds",
        )
        for name in positive:
            if not getattr(self, name) > 0:
                raise ValueError(f"config field {name} must be positive")
        if self.weight_decay < 0 or self.train_category_count < 0:
            raise ValueError("weight_decay and train_category_count must be >= 0")
        if self.lr_min > self.lr_max:
            raise ValueError("lr_min must not exceed lr_max")
        if self.aggregator not in AGGREGATORS:
            raise ValueError(f"unknown aggregator {self.aggregator!r}")
        if self.space not in ("euclidean", "hyperbolic"):
            raise ValueError(f"unknown space {self.space!r}")
        if self.space == "hyperbolic" and not self.curvature > 0:
            raise ValueError("hyperbolic space needs curvature > 0")

    def embedding_space(self) -> EmbeddingSpace:
        if self.space == "hyperbolic":
            return EmbeddingSpace.hyperbolic(self.curvature)
        return EmbeddingSpace.euclidean()


def _parse_bool(token: str) -> bool:
    low = token.strip().lower()
    if low in ("1", "true", "on", "yes"):
        return True
    if low in ("0", "false", "off", "no"):
        return False
    raise ValueError(f"expected a boolean, got {token!r}")


def config_to_text(cfg: TrainConfig) -> str:
    """Serialize as the flat key=value run-config format."""
    out = []
    for f in fields(TrainConfig):
        value = getattr(cfg, f.name)
        if isinstance(value, bool):
            value = "on" if value else "off"
        out.append(f"{f.name}={value}")
    return "\n".join(out) + "\n"


def load_config(path, base: TrainConfig | None = None) -> TrainConfig:
    """Parse a key=value run-config file on top of `base` (or the defaults)."""
    cfg = TrainConfig(**{f.name: getattr(base, f.name) for f in fields(TrainConfig)}) if base else TrainConfig()
    coerce = {f.name: f.type for f in fields(TrainConfig)}
    with open(path) as handle:
        for lineno, line in enumerate(handle, start=1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            if "=" not in line:
                raise ValueError(f"{path}:{lineno}: expected key=value, got {line!r}")
            key, value = (part.strip() for part in line.split("=", 1))
            if key not in coerce:
                raise ValueError(f"{path}:{lineno}: unknown config key {key!r}")
            kind = coerce[key]
            if kind is bool:
                parsed = _parse_bool(value)
            elif kind is int:
                parsed = int(value)
            elif kind is float:
                parsed = float(value)
            else:
                parsed = value
            setattr(cfg, key, parsed)
    cfg.__post_init__()
    return cfg


@dataclass
class Episode:
    """One K-way task: per-way support and query index blocks into a dataset."""

    ways: np.ndarray
    support_indices: np.ndarray
    query_indices: np.ndarray

    def flatten(self):
        """Return (support_idx, support_labels, query_idx, query_labels)."""
        k, n_s = self.support_indices.shape
        n_q = self.query_indices.shape[1]
        sup_labels = np.repeat(self.ways, n_s)
        qry_labels = np.repeat(self.ways, n_q)
        return (
            self.support_indices.reshape(-1),
            sup_labels,
            self.query_indices.reshape(-1),
            qry_labels,
        )


def sample_episode(
    labels,
    cfg: TrainConfig,
    rng: np.random.Generator,
    categories=None,
) -> Episode:
    """Draw a K-way episode: `ways` categories without replacement, then per
    way `shots` support and `queries_per_way` query clouds, disjoint within
    the way.
    """
    labels = np.asarray(labels)
    pool = np.unique(labels) if categories is None else np.asarray(sorted(categories))
    if len(pool) < cfg.ways:
        raise ValueError(f"need {cfg.ways} categories, only {len(pool)} available")
    ways = pool[rng.choice(len(pool), size=cfg.ways, replace=False)]
    need = cfg.shots + cfg.queries_per_way
    support = np.empty((cfg.ways, cfg.shots), dtype=np.int64)
    query = np.empty((cfg.ways, cfg.queries_per_way), dtype=np.int64)
    for row, cid in enumerate(ways):
        members = np.nonzero(labels == cid)[0]
        if len(members) < need:
            raise ValueError(
                f"category {cid} has {len(members)} clouds; episode needs {need}"
            )
        picked = members[rng.choice(len(members), size=need, replace=False)]
        support[row] = picked[: cfg.shots]
        query[row] = picked[cfg.shots :]
    return Episode(ways, support, query)


def cosine_lr(step: int, total_steps: int, lr_max: float, lr_min: float) -> float:
    """Cosine annealing from lr_max at step 0 to lr_min at step == total_steps."""
    if total_steps < 1:
        raise ValueError("total_steps must be >= 1")
    if not 0 <= step <= total_steps:
        raise ValueError(f"step {step} outside [0, {total_steps}]")
    return lr_min + 0.5 * (lr_max - lr_min) * (1.0 + math.cos(math.pi * step / total_steps))


@dataclass
class SgdState:
    """Momentum buffers matching a layer's parameter shapes."""

    velocity_weights: np.ndarray
    velocity_bias: np.ndarray

    @classmethod
    def zeros(cls, layer: LinearLayer) -> "SgdState":
        return cls(np.zeros_like(layer.weights), np.zeros_like(layer.bias))


def sgd_step(
    layer: LinearLayer,
    grad_weights: np.ndarray,
    grad_bias: np.ndarray,
    state: SgdState,
    lr: float,
    momentum: float,
    weight_decay: float,
):
    """Classical SGD update: g' = g + wd*p; v = m*v + g'; p = p - lr*v.

    Weight decay enters the gradient only, never the reported loss.

    Raises:
        NumericError: any gradient entry is non-finite.
    """
    if not (np.isfinite(grad_weights).all() and np.isfinite(grad_bias).all()):
        n_bad = int((~np.isfinite(grad_weights)).sum() + (~np.isfinite(grad_bias)).sum())
        raise NumericError(f"non-finite gradient ({n_bad} bad entries); aborting update")
    state.velocity_weights = momentum * state.velocity_weights + grad_weights + weight_decay * layer.weights
    state.velocity_bias = momentum * state.velocity_bias + grad_bias + weight_decay * layer.bias
    layer.weights = layer.weights - lr * state.velocity_weights
    layer.bias = layer.bias - lr * state.velocity_bias
    return layer, state


def _episode_accuracy(logits: np.ndarray, class_ids: np.ndarray, true_labels: np.ndarray) -> float:
    predicted = class_ids[np.argmax(logits, axis=1)]
    return float((predicted == true_labels).mean())


def train(
    features: np.ndarray,
    labels,
    cfg: TrainConfig,
    seed: int,
    val_features: np.ndarray | None = None,
    val_labels=None,
    val_episodes: int = 0,
):
    """Run the episodic SGD loop and return (layer, log).

    The learning rate follows cosine annealing over
    epochs * train_episodes_per_epoch steps, one step per episode; the trace
    in the log therefore starts at lr_max and its final (post-training) entry
    is exactly lr_min. Optionally evaluates `val_episodes` held-out episodes
    per epoch. Fully deterministic for fixed inputs.
    """
    cfg.validate()
    features = np.asarray(features, dtype=np.float64)
    labels = np.asarray(labels)
    space = cfg.embedding_space()

    root = np.random.SeedSequence(seed)
    init_seq, episode_seq, val_seq = root.spawn(3)
    layer = LinearLayer.initialize(in_dim=features.shape[1], seed=init_seq)
    state = SgdState.zeros(layer)
    episode_rng = np.random.default_rng(episode_seq)
    val_seeds = val_seq.generate_state(cfg.epochs) if val_episodes else None

    total_steps = cfg.epochs * cfg.train_episodes_per_epoch
    lr_trace = [cosine_lr(t, total_steps, cfg.lr_max, cfg.lr_min) for t in range(total_steps + 1)]

    epoch_log = []
    step = 0
    for epoch in range(cfg.epochs):
        losses = []
        accuracies = []
        for _ in range(cfg.train_episodes_per_epoch):
            episode = sample_episode(labels, cfg, episode_rng)
            sup_idx, sup_labels, qry_idx, qry_labels = episode.flatten()
            loss, logits, grad_w, grad_b = episode_backward(
                features[sup_idx], sup_labels, features[qry_idx], qry_labels, layer, space
            )
            if not np.isfinite(loss):
                raise NumericError(f"non-finite loss at step {step}")
            layer, state = sgd_step(
                layer, grad_w, grad_b, state, lr_trace[step], cfg.momentum, cfg.weight_decay
            )
            step += 1
            losses.append(loss)
            accuracies.append(_episode_accuracy(logits, np.unique(sup_labels), qry_labels))
        entry = {
            "epoch": epoch + 1,
            "loss": float(np.mean(losses)),
            "lr": lr_trace[step - cfg.train_episodes_per_epoch],
            "train_accuracy": float(np.mean(accuracies)),
        }
        if val_episodes and val_features is not None:
            val_cfg = replace_config(cfg, test_episodes=val_episodes)
            report = evaluate(layer, val_features, val_labels, val_cfg, int(val_seeds[epoch]))
            entry["val_accuracy"] = report["mean"]
        epoch_log.append(entry)

    log = {
        "epochs": epoch_log,
        "lr_trace": lr_trace,
        "final_lr": lr_trace[-1],
        "total_episodes": total_steps,
    }
    return layer, log


def replace_config(cfg: TrainConfig, **overrides) -> TrainConfig:
    values = {f.name: getattr(cfg, f.name) for f in fields(TrainConfig)}
    values.update(overrides)
    return TrainConfig(**values)


def evaluate(
    layer: LinearLayer,
    features: np.ndarray,
    labels,
    cfg: TrainConfig,
    seed: int,
    categories=None,
) -> dict:
    """Frozen-layer episodic evaluation.

    Episode i draws from an RNG seeded by (seed, i), so episodes are
    reproducible independently of each other and could run in parallel.
    Prototypes come from each test episode's own support set.

    Returns:
        {"per_episode": [...], "mean": ..., "std": ..., "episodes": n} with
        population standard deviation over episodes.
    """
    features = np.asarray(features, dtype=np.float64)
    labels = np.asarray(labels)
    space = cfg.embedding_space()
    accuracies = np.empty(cfg.test_episodes)
    for i in range(cfg.test_episodes):
        rng = np.random.default_rng(np.random.SeedSequence([seed, i]))
        episode = sample_episode(labels, cfg, rng, categories=categories)
        sup_idx, sup_labels, qry_idx, qry_labels = episode.flatten()
        prototypes = compute_prototypes(forward(features[sup_idx], layer), sup_labels)
        predictions = predict_batch(prototypes, forward(features[qry_idx], layer), space)
        accuracies[i] = (predictions == qry_labels).mean()
    return {
        "per_episode": accuracies.tolist(),
        "mean": float(accuracies.mean()),
        "std": float(accuracies.std()),
        "episodes": int(cfg.test_episodes),
    }


def run_experiment(features: np.ndarray, labels, cfg: TrainConfig, seed: int) -> dict:
    """One full train + evaluate cycle under a single seed.

    With cfg.train_category_count > 0 the categories are partitioned first
    and evaluation runs on the held-out side; with 0 the model trains and
    evaluates on all categories (smoke-test mode).
    """
    features = np.asarray(features, dtype=np.float64)
    labels = np.asarray(labels)
    cats = np.unique(labels)
    if cfg.train_category_count > 0:
        split = make_split(cats.tolist(), cfg.train_category_count, seed)
        train_mask = np.isin(labels, split.train_categories)
        test_mask = np.isin(labels, split.test_categories)
    else:
        split = SplitSpec(tuple(cats.tolist()), tuple(cats.tolist()), seed)
        train_mask = np.ones(len(labels), dtype=bool)
        test_mask = train_mask
    layer, log = train(features[train_mask], labels[train_mask], cfg, seed)
    report = evaluate(layer, features[test_mask], labels[test_mask], cfg, seed)
    return {
        "seed": seed,
        "split": {"train": list(split.train_categories), "test": list(split.test_categories)},
        "train_log": log,
        "evaluation": report,
        "layer": layer,
    }


def multi_seed_experiment(features: np.ndarray, labels, cfg: TrainConfig, base_seed: int = 0) -> dict:
    """Repeat run_experiment over cfg.seeds consecutive seeds and summarize.

    Returns per-seed means plus their grand mean and (population) grand std.
    """
    runs = [run_experiment(features, labels, cfg, base_seed + i) for i in range(cfg.seeds)]
    means = np.array([run["evaluation"]["mean"] for run in runs])
    return {
        "seeds": [run["seed"] for run in runs],
        "per_seed_mean": means.tolist(),
        "per_seed_std": [run["evaluation"]["std"] for run in runs],
        "grand_mean": float(means.mean()),
        "grand_std": float(means.std()),
        "runs": runs,
    }
