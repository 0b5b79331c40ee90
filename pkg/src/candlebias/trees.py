"""Entropy decision tree and seeded bootstrap random forest with OOB error.

Trees consume raw (unstandardized) features; axis-aligned thresholds are
scale-equivariant. All randomness flows through :func:`candlebias.seeding.mix64`
so a forest trained from one master seed is bit-identical whether trees are
fitted sequentially or in parallel.
"""

from __future__ import annotations

import math
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .seeding import mix64

DEFAULT_N_ESTIMATORS = 250
_FEATURE_STREAM = 1  # stream index for per-node feature sampling, vs 0 for bootstrap


@dataclass
class TreeParams:
    max_depth: int = 100
    min_samples_split: int = 100
    max_features: int = 5

    def validate(self, n_features: int) -> None:
        if self.max_depth < 1 or self.min_samples_split < 1:
            raise ValueError("max_depth and min_samples_split must be positive")
        if not (1 <= self.max_features <= n_features):
            raise ValueError(f"max_features must be in 1..{n_features}")

    def as_dict(self) -> dict:
        return {
            "max_depth": self.max_depth,
            "min_samples_split": self.min_samples_split,
            "max_features": self.max_features,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "TreeParams":
        return cls(int(d["max_depth"]), int(d["min_samples_split"]), int(d["max_features"]))


@dataclass
class SplitNode:
    """Internal node (feature, threshold, children) or leaf (p_up, n_samples)."""

    feature: int | None = None
    threshold: float | None = None
    left: "SplitNode | None" = None
    right: "SplitNode | None" = None
    p_up: float | None = None
    n_samples: int | None = None

    @property
    def is_leaf(self) -> bool:
        return self.p_up is not None


@dataclass
class ForestModel:
    trees: list
    params: TreeParams
    n_estimators: int
    seed: int
    bootstrap_indices: list | None = None
    oob_error: float | None = None


@lru_cache(maxsize=1 << 20)
def _entropy_counts(positives: int, n: int) -> float:
    # both fractions come from exact integer divisions so H(k, n) == H(n-k, n)
    if positives <= 0 or positives >= n:
        return 0.0
    p = positives / n
    q = (n - positives) / n
    return -p * math.log2(p) - q * math.log2(q)


def impurity(labels) -> float:
    """Entropy of a binary label multiset in bits; 0 log 0 counts as 0."""
    y = np.asarray(labels)
    if y.size == 0:
        raise ValueError("impurity of an empty label set is undefined")
    return _entropy_counts(int(y.sum()), y.size)


def best_split(X: np.ndarray, y: np.ndarray, candidate_features=None):
    """Greedy search over midpoints between consecutive distinct feature values.

    Returns (feature_index, threshold, information_gain) for the gain-maximizing
    split, or None when no candidate has strictly positive gain. Ties break to
    the lowest feature index, then the lowest threshold; candidate features are
    scanned in ascending index order regardless of the order supplied.
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y)
    n = len(y)
    feats = range(X.shape[1]) if candidate_features is None else sorted(candidate_features)

    pos_total = int(y.sum())
    h_parent = _entropy_counts(pos_total, n)
    best = None
    best_gain = 0.0
    for f in feats:
        order = np.argsort(X[:, f], kind="stable")
        xs = X[order, f]
        cum_pos = np.cumsum(y[order])
        for i in range(n - 1):
            if xs[i] == xs[i + 1]:
                continue
            n_l = i + 1
            n_r = n - n_l
            pos_l = int(cum_pos[i])
            gain = (h_parent
                    - (n_l / n) * _entropy_counts(pos_l, n_l)
                    - (n_r / n) * _entropy_counts(pos_total - pos_l, n_r))
            if gain > best_gain:
                best_gain = gain
                best = (int(f), float((xs[i] + xs[i + 1]) / 2.0), gain)
    return best


def fit_tree(X: np.ndarray, y: np.ndarray, params: TreeParams | None = None,
             feature_sampler: np.random.Generator | None = None) -> SplitNode:
    """Grow a tree greedily; rows with x[feature] <= threshold go left.

    A node becomes a leaf when it is pure, the depth cap is hit, it holds
    fewer than min_samples_split rows, or no split has positive gain. When a
    feature_sampler is given, each node draws max_features candidate features
    without replacement before the split search.
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y)
    params = params or TreeParams()
    params.validate(X.shape[1])

    def grow(X, y, depth):
        n = len(y)
        pos = int(y.sum())
        if pos == 0 or pos == n or depth >= params.max_depth or n < params.min_samples_split:
            return SplitNode(p_up=pos / n, n_samples=n)
        if feature_sampler is not None:
            candidates = feature_sampler.choice(X.shape[1], size=params.max_features,
                                                replace=False)
        else:
            candidates = None
        split = best_split(X, y, candidates)
        if split is None:
            return SplitNode(p_up=pos / n, n_samples=n)
        f, threshold, _ = split
        mask = X[:, f] <= threshold
        return SplitNode(
            feature=f,
            threshold=threshold,
            left=grow(X[mask], y[mask], depth + 1),
            right=grow(X[~mask], y[~mask], depth + 1),
        )

    return grow(X, y, 0)


def predict_tree(root: SplitNode, x) -> float:
    """Leaf probability of class 1 for one feature row; ties descend left."""
    node = root
    while not node.is_leaf:
        node = node.left if x[node.feature] <= node.threshold else node.right
    return node.p_up


def tree_predict_proba(root: SplitNode, X: np.ndarray) -> np.ndarray:
    X = np.asarray(X, dtype=float)
    return np.array([predict_tree(root, x) for x in X])


def tree_predict(root: SplitNode, X: np.ndarray) -> np.ndarray:
    return (tree_predict_proba(root, X) >= 0.5).astype(np.int64)


def bootstrap_sample(n: int, seed: int) -> np.ndarray:
    """n uniform draws with replacement from [0, n), deterministic per seed."""
    if n < 1:
        raise ValueError("bootstrap_sample needs n >= 1")
    return np.random.default_rng(seed).integers(0, n, size=n)


def fit_forest(X: np.ndarray, y: np.ndarray,
               n_estimators: int = DEFAULT_N_ESTIMATORS,
               params: TreeParams | None = None,
               seed: int = 0,
               bootstrap_fn=bootstrap_sample,
               n_jobs: int = 1) -> ForestModel:
    """Train n_estimators trees on bootstrap samples and record the OOB error.

    Tree t draws its bootstrap from mix64(seed, t) and its per-node feature
    sampler from mix64(mix64(seed, t), 1), so the forest depends only on
    (seed, t) and never on execution order; n_jobs > 1 gives bit-identical
    results to sequential training. ``bootstrap_fn(n, seed)`` is injectable
    for tests (e.g. an identity bootstrap).
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y)
    params = params or TreeParams()
    params.validate(X.shape[1])
    if n_estimators < 1:
        raise ValueError("n_estimators must be positive")
    if len(y) < 2:
        raise ValueError("forest training needs at least 2 rows")
    n = len(y)

    def fit_one(t):
        tree_seed = mix64(seed, t)
        idx = np.asarray(bootstrap_fn(n, tree_seed))
        sampler = np.random.default_rng(mix64(tree_seed, _FEATURE_STREAM))
        root = fit_tree(X[idx], y[idx], params, feature_sampler=sampler)
        return root, idx

    if n_jobs > 1:
        with ThreadPoolExecutor(max_workers=n_jobs) as pool:
            fitted = list(pool.map(fit_one, range(n_estimators)))
    else:
        fitted = [fit_one(t) for t in range(n_estimators)]

    forest = ForestModel(
        trees=[root for root, _ in fitted],
        params=params,
        n_estimators=n_estimators,
        seed=seed,
        bootstrap_indices=[idx for _, idx in fitted],
    )
    forest.oob_error = oob_error(forest, X, y)
    return forest


def oob_error(forest: ForestModel, X: np.ndarray, y: np.ndarray) -> float | None:
    """Misclassification rate of samples under the trees that never saw them.

    Each sample is scored by the mean leaf probability over trees whose
    bootstrap excludes it (ties classify as 1); samples in every bootstrap
    are left out of the denominator. Returns None with a warning when no
    sample has an out-of-bag tree.
    """
    if forest.bootstrap_indices is None:
        raise ValueError("forest has no recorded bootstrap indices")
    X = np.asarray(X, dtype=float)
    y = np.asarray(y)
    n = len(y)

    prob_sum = np.zeros(n)
    tree_count = np.zeros(n, dtype=np.int64)
    for root, idx in zip(forest.trees, forest.bootstrap_indices):
        oob_mask = np.ones(n, dtype=bool)
        oob_mask[np.asarray(idx)] = False
        if not oob_mask.any():
            continue
        prob_sum[oob_mask] += tree_predict_proba(root, X[oob_mask])
        tree_count[oob_mask] += 1

    covered = tree_count > 0
    if not covered.any():
        warnings.warn("OOB error undefined: every sample appears in every bootstrap")
        return None
    pred = (prob_sum[covered] / tree_count[covered] >= 0.5).astype(np.int64)
    return float(np.mean(pred != y[covered]))


def predict_forest(forest: ForestModel, X: np.ndarray) -> np.ndarray:
    """Class 1 when the mean leaf probability over trees is at least 0.5."""
    X = np.asarray(X, dtype=float)
    mean_p = np.mean([tree_predict_proba(root, X) for root in forest.trees], axis=0)
    return (mean_p >= 0.5).astype(np.int64)


def node_to_dict(node: SplitNode) -> dict:
    if node.is_leaf:
        return {"p_up": node.p_up, "n": node.n_samples}
    return {
        "feature": node.feature,
        "threshold": node.threshold,
        "left": node_to_dict(node.left),
        "right": node_to_dict(node.right),
    }


def node_from_dict(d: dict) -> SplitNode:
    if "p_up" in d:
        return SplitNode(p_up=float(d["p_up"]), n_samples=int(d["n"]))
    return SplitNode(
        feature=int(d["feature"]),
        threshold=float(d["threshold"]),
        left=node_from_dict(d["left"]),
        right=node_from_dict(d["right"]),
    )


def forest_to_dict(forest: ForestModel) -> dict:
    return {
        "n_estimators": forest.n_estimators,
        "seed": forest.seed,
        "params": forest.params.as_dict(),
        "oob_error": forest.oob_error,
        "trees": [node_to_dict(root) for root in forest.trees],
    }


def forest_from_dict(d: dict) -> ForestModel:
    return ForestModel(
        trees=[node_from_dict(t) for t in d["trees"]],
        params=TreeParams.from_dict(d["params"]),
        n_estimators=int(d["n_estimators"]),
        seed=int(d["seed"]),
        bootstrap_indices=None,
        oob_error=None if d["oob_error"] is None else float(d["oob_error"]),
    )
