"""Extra-trees and random-forest classifiers for binary labels.

Extra-trees draws a random subset of candidate features at each node and a
single uniform threshold per candidate inside that feature's value range,
then keeps the candidate with the best Gini impurity decrease; there is no
bootstrap, so a tree depends on its training rows only through order-free
statistics. Random forest bootstraps the rows and searches all midpoint
thresholds over the candidate features. Class weights multiply the per-class
sample contributions to impurity and to leaf counts.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import Optional, Union

import numpy as np

ClassWeights = Union[None, str, dict[int, float]]


@dataclass(frozen=True)
class EnsembleConfig:
    mode: str = "extra_trees"  # or "random_forest"
    n_trees: int = 100
    max_features: Optional[int] = None  # default: ceil(sqrt(n_features))
    min_samples_split: int = 2
    seed: int = 0
    class_weights: ClassWeights = "balanced"

    def validate(self) -> None:
        if self.mode not in ("extra_trees", "random_forest"):
            raise ValueError(f"unknown ensemble mode {self.mode!r}")
        if self.n_trees < 1 or self.min_samples_split < 2:
            raise ValueError("need n_trees >= 1 and min_samples_split >= 2")


@dataclass
class DecisionTree:
    """Flat array representation; leaves have feature -1 and carry weighted
    class counts."""

    feature: np.ndarray  # int32, -1 at leaves
    threshold: np.ndarray  # float64
    left: np.ndarray  # int32 child ids, -1 at leaves
    right: np.ndarray
    counts: np.ndarray  # float64 (n_nodes, 2); weighted class counts at leaves

    def leaf_for(self, X: np.ndarray) -> np.ndarray:
        node = np.zeros(len(X), dtype=np.int64)
        while True:
            feat = self.feature[node]
            active = feat >= 0
            if not active.any():
                return node
            idx = np.where(active)[0]
            go_left = X[idx, feat[idx]] <= self.threshold[node[idx]]
            node[idx] = np.where(go_left, self.left[node[idx]], self.right[node[idx]])


@dataclass
class TreeEnsemble:
    trees: list[DecisionTree]
    mode: str
    config: EnsembleConfig
    n_features: int
    class_weight_values: tuple[float, float] = (1.0, 1.0)


def resolve_class_weights(spec: ClassWeights, y: np.ndarray) -> tuple[float, float]:
    """Map a weight spec to concrete (w_negative, w_positive).

    "balanced" gives inverse-prevalence weights n / (2 * n_class).
    """
    if spec is None:
        return (1.0, 1.0)
    if spec == "balanced":
        n = len(y)
        counts = np.bincount(y, minlength=2)
        return tuple(n / (2.0 * c) if c > 0 else 1.0 for c in counts)
    if isinstance(spec, dict):
        return (float(spec.get(0, 1.0)), float(spec.get(1, 1.0)))
    raise ValueError(f"bad class_weights spec: {spec!r}")


def _weighted_counts(y: np.ndarray, w: tuple[float, float]) -> np.ndarray:
    raw = np.bincount(y, minlength=2).astype(np.float64)
    return raw * np.asarray(w)


def _gini(counts: np.ndarray) -> float:
    total = counts.sum()
    if total <= 0.0:
        return 0.0
    return 1.0 - float((counts**2).sum()) / (total * total)


class _TreeBuilder:
    def __init__(self, cfg: EnsembleConfig, rng: np.random.Generator, w: tuple[float, float]):
        self.cfg = cfg
        self.rng = rng
        self.w = w
        self.feature: list[int] = []
        self.threshold: list[float] = []
        self.left: list[int] = []
        self.right: list[int] = []
        self.counts: list[tuple[float, float]] = []

    def _new_node(self) -> int:
        self.feature.append(-1)
        self.threshold.append(np.nan)
        self.left.append(-1)
        self.right.append(-1)
        self.counts.append((0.0, 0.0))
        return len(self.feature) - 1

    def build(self, X: np.ndarray, y: np.ndarray) -> DecisionTree:
        root = self._new_node()
        stack = [(root, np.arange(len(y)))]
        while stack:
            node, idx = stack.pop()
            yn = y[idx]
            wc = _weighted_counts(yn, self.w)
            if (
                len(idx) < self.cfg.min_samples_split
                or wc[0] == 0.0
                or wc[1] == 0.0
            ):
                self.counts[node] = (wc[0], wc[1])
                continue
            split = self._choose_split(X, idx, yn)
            if split is None:
                self.counts[node] = (wc[0], wc[1])
                continue
            f, t, mask = split
            self.feature[node] = f
            self.threshold[node] = t
            left_id = self._new_node()
            right_id = self._new_node()
            self.left[node] = left_id
            self.right[node] = right_id
            stack.append((right_id, idx[~mask]))
            stack.append((left_id, idx[mask]))
        return DecisionTree(
            feature=np.array(self.feature, dtype=np.int32),
            threshold=np.array(self.threshold, dtype=np.float64),
            left=np.array(self.left, dtype=np.int32),
            right=np.array(self.right, dtype=np.int32),
            counts=np.array(self.counts, dtype=np.float64),
        )

    def _candidate_features(self, n_features: int) -> np.ndarray:
        k = self.cfg.max_features or int(np.ceil(np.sqrt(n_features)))
        k = min(max(1, k), n_features)
        return self.rng.choice(n_features, size=k, replace=False)

    def _choose_split(self, X, idx, yn):
        parent = _weighted_counts(yn, self.w)
        parent_imp = _gini(parent)
        total_w = parent.sum()
        best = None
        best_score = -np.inf
        for f in self._candidate_features(X.shape[1]):
            col = X[idx, f]
            lo, hi = col.min(), col.max()
            if lo == hi:
                continue
            if self.cfg.mode == "extra_trees":
                t = self.rng.uniform(lo, hi)
                mask = col <= t
                left = _weighted_counts(yn[mask], self.w)
                right = parent - left
                score = parent_imp - (
                    left.sum() * _gini(left) + right.sum() * _gini(right)
                ) / total_w
            else:
                t, score = self._best_midpoint(col, yn, parent, parent_imp, total_w)
                if t is None:
                    continue
                mask = col <= t
            if score > best_score:
                best_score = score
                best = (int(f), float(t), mask)
        return best

    def _best_midpoint(self, col, yn, parent, parent_imp, total_w):
        """Exhaustive scan over midpoints between consecutive distinct values;
        returns (threshold, gini decrease) of the best one."""
        order = np.argsort(col, kind="stable")
        cs = col[order]
        pos = (yn[order] == 1).astype(np.float64)
        cum_pos = np.cumsum(pos) * self.w[1]
        cum_neg = np.cumsum(1.0 - pos) * self.w[0]
        cut = np.nonzero(cs[:-1] < cs[1:])[0]  # split after position i
        l0, l1 = cum_neg[cut], cum_pos[cut]
        wl = l0 + l1
        r0, r1 = parent[0] - l0, parent[1] - l1
        wr = r0 + r1
        child = (wl - (l0**2 + l1**2) / wl) + (wr - (r0**2 + r1**2) / wr)
        scores = parent_imp - child / total_w
        best = int(np.argmax(scores))
        threshold = (cs[cut[best]] + cs[cut[best] + 1]) / 2.0
        return float(threshold), float(scores[best])


def train_ensemble(X: np.ndarray, y: np.ndarray, cfg: EnsembleConfig = EnsembleConfig()) -> TreeEnsemble:
    """Fit an ensemble of decision trees; tree i is seeded with seed + i so
    the forest is reproducible and independent of scheduling."""
    cfg.validate()
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.int64)
    if X.ndim != 2 or len(X) != len(y):
        raise ValueError("X must be 2-D with one row per label")
    if len(y) < 2:
        raise ValueError(f"need at least 2 training rows, got {len(y)}")
    bad = ~np.isfinite(X)
    if bad.any():
        r, c = np.argwhere(bad)[0]
        raise ValueError(f"non-finite feature value at row {r}, column {c}")
    if len(np.unique(y)) < 2:
        warnings.warn(
            "training labels contain a single class; model will be degenerate",
            UserWarning,
            stacklevel=2,
        )

    w = resolve_class_weights(cfg.class_weights, y)
    trees = []
    for i in range(cfg.n_trees):
        rng = np.random.default_rng(cfg.seed + i)
        if cfg.mode == "random_forest":
            rows = rng.integers(0, len(y), size=len(y))
            Xi, yi = X[rows], y[rows]
        else:
            Xi, yi = X, y
        trees.append(_TreeBuilder(cfg, rng, w).build(Xi, yi))
    return TreeEnsemble(
        trees=trees,
        mode=cfg.mode,
        config=cfg,
        n_features=X.shape[1],
        class_weight_values=w,
    )


def predict_proba(ensemble: TreeEnsemble, X: np.ndarray) -> np.ndarray:
    """Mean over trees of the weighted positive-class leaf frequency."""
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    if X.shape[1] != ensemble.n_features:
        raise ValueError(
            f"feature width {X.shape[1]} does not match training width "
            f"{ensemble.n_features}"
        )
    acc = np.zeros(len(X), dtype=np.float64)
    for tree in ensemble.trees:
        leaves = tree.leaf_for(X)
        counts = tree.counts[leaves]
        totals = counts.sum(axis=1)
        frac = np.divide(
            counts[:, 1], totals, out=np.full(len(X), 0.5), where=totals > 0
        )
        acc += frac
    return acc / len(ensemble.trees)
