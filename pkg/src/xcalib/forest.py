"""From-scratch random-forest classifier over feature vectors.

CART trees on bootstrap resamples with Gini-impurity splits over a random
feature subset per node.  Leaves store the positive-class fraction so the
forest scores with a real-valued confidence.  All randomness derives from the
hyperparameter seed: tree i uses SeedSequence(seed).spawn(n_trees)[i].
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .features import Family, FeatureVector

MODEL_FORMAT_VERSION = 1


@dataclass(frozen=True)
class ForestHyper:
    n_trees: int = 300
    max_depth: int = 20
    min_samples_leaf: int = 1
    features_per_split: int | None = None  # None -> ceil(sqrt(d))
    seed: int = 0
    bootstrap: bool = True

    def __post_init__(self) -> None:
        if self.n_trees < 1 or self.max_depth < 1 or self.min_samples_leaf < 1:
            raise ValueError("n_trees, max_depth and min_samples_leaf must be positive")

    def resolve_features_per_split(self, d: int) -> int:
        k = self.features_per_split if self.features_per_split is not None else math.isqrt(d)
        if self.features_per_split is None and k * k < d:
            k += 1
        return min(max(k, 1), d)


@dataclass
class Tree:
    """Flat node arrays; feature < 0 marks a leaf.  ``gain`` holds the
    node-weighted impurity decrease used for feature importance."""

    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    value: np.ndarray
    gain: np.ndarray

    def predict(self, x: np.ndarray) -> np.ndarray:
        node = np.zeros(len(x), dtype=np.int32)
        while True:
            feat = self.feature[node]
            internal = feat >= 0
            if not internal.any():
                break
            rows = np.nonzero(internal)[0]
            go_left = x[rows, feat[rows]] <= self.threshold[node[rows]]
            node[rows] = np.where(go_left, self.left[node[rows]], self.right[node[rows]])
        return self.value[node]


@dataclass
class ForestModel:
    trees: list[Tree]
    hyper: ForestHyper
    feature_names: tuple[str, ...]
    family: Family
    training_digest: str = ""

    @property
    def n_features(self) -> int:
        return len(self.feature_names)


class _TreeBuilder:
    def __init__(self, x: np.ndarray, y: np.ndarray, hyper: ForestHyper, rng: np.random.Generator):
        self.x = x
        self.y = y
        self.hyper = hyper
        self.rng = rng
        self.k = hyper.resolve_features_per_split(x.shape[1])
        self.feature: list[int] = []
        self.threshold: list[float] = []
        self.left: list[int] = []
        self.right: list[int] = []
        self.value: list[float] = []
        self.gain: list[float] = []
        self.n_root = len(y)

    def _new_node(self) -> int:
        self.feature.append(-1)
        self.threshold.append(0.0)
        self.left.append(-1)
        self.right.append(-1)
        self.value.append(0.0)
        self.gain.append(0.0)
        return len(self.feature) - 1

    @staticmethod
    def _gini(pos: float, total: float) -> float:
        if total == 0:
            return 0.0
        p = pos / total
        return 1.0 - p * p - (1.0 - p) * (1.0 - p)

    def _best_split(self, rows: np.ndarray) -> tuple[int, float, float] | None:
        """Search the sampled feature subset for the split maximizing Gini gain.

        Candidate thresholds are midpoints between consecutive sorted unique
        values; equal gains break toward the lowest feature index, then the
        lowest threshold.
        """
        m = len(rows)
        min_leaf = self.hyper.min_samples_leaf
        feats = self.rng.choice(self.x.shape[1], size=self.k, replace=False)
        sub = self.x[np.ix_(rows, feats)]
        labels = self.y[rows]
        total_pos = labels.sum()
        parent = self._gini(total_pos, m)

        order = np.argsort(sub, axis=0, kind="stable")
        sorted_vals = np.take_along_axis(sub, order, axis=0)
        sorted_y = labels[order]
        prefix_pos = np.cumsum(sorted_y, axis=0)

        left_n = np.arange(1, m)[:, None].astype(float)
        right_n = m - left_n
        left_pos = prefix_pos[:-1].astype(float)
        right_pos = total_pos - left_pos
        gini_left = 1.0 - (left_pos**2 + (left_n - left_pos) ** 2) / left_n**2
        gini_right = 1.0 - (right_pos**2 + (right_n - right_pos) ** 2) / right_n**2
        weighted = (left_n * gini_left + right_n * gini_right) / m
        gains = parent - weighted

        valid = sorted_vals[1:] > sorted_vals[:-1]
        if min_leaf > 1:
            sizes_ok = (left_n >= min_leaf) & (right_n >= min_leaf)
            valid = valid & sizes_ok
        gains = np.where(valid, gains, -np.inf)

        best: tuple[float, int, float] | None = None  # (gain, feat_idx, threshold)
        for col in range(self.k):
            col_gains = gains[:, col]
            top = col_gains.max() if len(col_gains) else -np.inf
            if top <= 0.0 or not np.isfinite(top):
                continue
            rows_at_top = np.nonzero(col_gains == top)[0]
            thresholds = []
            for i in rows_at_top:
                a, b = sorted_vals[i, col], sorted_vals[i + 1, col]
                thr = (a + b) / 2.0
                if thr >= b:  # adjacent floats: fall back so <= routes correctly
                    thr = a
                thresholds.append(thr)
            thr = min(thresholds)
            cand = (top, int(feats[col]), float(thr))
            if best is None or cand[0] > best[0] or (
                cand[0] == best[0] and (cand[1], cand[2]) < (best[1], best[2])
            ):
                best = cand
        if best is None:
            return None
        return best[1], best[2], best[0]

    def build(self) -> Tree:
        all_rows = np.arange(len(self.y))
        root = self._new_node()
        stack = [(root, all_rows, 0)]
        while stack:
            node, rows, depth = stack.pop()
            pos = self.y[rows].sum()
            m = len(rows)
            self.value[node] = pos / m
            if depth >= self.hyper.max_depth or pos == 0 or pos == m or m < 2 * self.hyper.min_samples_leaf:
                continue
            split = self._best_split(rows)
            if split is None:
                continue
            feat, thr, gain = split
            go_left = self.x[rows, feat] <= thr
            left_rows, right_rows = rows[go_left], rows[~go_left]
            if len(left_rows) == 0 or len(right_rows) == 0:
                continue
            self.feature[node] = feat
            self.threshold[node] = thr
            self.gain[node] = (m / self.n_root) * gain
            l, r = self._new_node(), self._new_node()
            self.left[node], self.right[node] = l, r
            stack.append((r, right_rows, depth + 1))
            stack.append((l, left_rows, depth + 1))
        return Tree(
            feature=np.array(self.feature, dtype=np.int32),
            threshold=np.array(self.threshold, dtype=np.float64),
            left=np.array(self.left, dtype=np.int32),
            right=np.array(self.right, dtype=np.int32),
            value=np.array(self.value, dtype=np.float64),
            gain=np.array(self.gain, dtype=np.float64),
        )


def train_forest(
    x: np.ndarray,
    t: np.ndarray,
    hyper: ForestHyper,
    feature_names: tuple[str, ...] | None = None,
    family: Family = Family.BOW_PROP,
) -> ForestModel:
    x = np.asarray(x, dtype=np.float64)
    t = np.asarray(t, dtype=np.int64)
    if x.ndim != 2 or x.shape[1] < 1:
        raise ValueError("feature matrix must be 2-D with at least one feature")
    if len(x) != len(t) or len(x) < 2:
        raise ValueError("need at least two labeled rows")
    names = feature_names or tuple(f"f{i}" for i in range(x.shape[1]))
    if len(names) != x.shape[1]:
        raise ValueError("feature_names length must match feature count")

    seeds = np.random.SeedSequence(hyper.seed).spawn(hyper.n_trees)
    trees: list[Tree] = []
    for ss in seeds:
        rng = np.random.default_rng(ss)
        if hyper.bootstrap:
            rows = rng.integers(0, len(t), size=len(t))
        else:
            rows = np.arange(len(t))
        trees.append(_TreeBuilder(x[rows], t[rows], hyper, rng).build())

    model = ForestModel(trees=trees, hyper=hyper, feature_names=tuple(names), family=family)
    model.training_digest = _model_digest(model)
    return model


def score_matrix(model: ForestModel, x: np.ndarray) -> np.ndarray:
    """Mean leaf fraction across trees for each row of ``x``."""
    x = np.asarray(x, dtype=np.float64)
    if x.shape[1] != model.n_features:
        raise ValueError(f"expected {model.n_features} features, got {x.shape[1]}")
    out = np.zeros(len(x))
    for tree in model.trees:
        out += tree.predict(x)
    return out / len(model.trees)


def score(model: ForestModel, fv: FeatureVector) -> float:
    if fv.names != model.feature_names:
        raise ValueError("feature names do not match the trained model")
    return float(score_matrix(model, fv.values[None, :])[0])


def feature_importance(model: ForestModel) -> dict[str, float]:
    """Mean decrease in Gini impurity per feature, normalized to sum to 1."""
    totals = np.zeros(model.n_features)
    for tree in model.trees:
        internal = tree.feature >= 0
        np.add.at(totals, tree.feature[internal], tree.gain[internal])
    s = totals.sum()
    if s > 0:
        totals = totals / s
    return {name: float(v) for name, v in zip(model.feature_names, totals)}


def _model_digest(model: ForestModel) -> str:
    import hashlib

    h = hashlib.sha256()
    h.update(json.dumps(_header(model), sort_keys=True).encode())
    for tree in model.trees:
        for arr in (tree.feature, tree.threshold, tree.left, tree.right, tree.value, tree.gain):
            h.update(arr.tobytes())
    return h.hexdigest()[:16]


def _header(model: ForestModel) -> dict:
    h = model.hyper
    return {
        "version": MODEL_FORMAT_VERSION,
        "family": model.family.value,
        "feature_names": list(model.feature_names),
        "hyper": {
            "n_trees": h.n_trees,
            "max_depth": h.max_depth,
            "min_samples_leaf": h.min_samples_leaf,
            "features_per_split": h.features_per_split,
            "seed": h.seed,
            "bootstrap": h.bootstrap,
        },
    }


def save(model: ForestModel, path: str | Path) -> None:
    """Write the model as a JSON container; floats round-trip exactly via repr."""
    doc = _header(model)
    doc["training_digest"] = model.training_digest
    doc["trees"] = [
        {
            "feature": tree.feature.tolist(),
            "threshold": tree.threshold.tolist(),
            "left": tree.left.tolist(),
            "right": tree.right.tolist(),
            "value": tree.value.tolist(),
            "gain": tree.gain.tolist(),
        }
        for tree in model.trees
    ]
    Path(path).write_text(json.dumps(doc, sort_keys=True))


def load(path: str | Path) -> ForestModel:
    try:
        doc = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ValueError(f"unreadable model file: {exc}") from exc
    for key in ("version", "family", "feature_names", "hyper", "trees"):
        if key not in doc:
            raise ValueError(f"model file missing field: {key}")
    if doc["version"] != MODEL_FORMAT_VERSION:
        raise ValueError(f"unsupported model version: {doc['version']}")
    hy = doc["hyper"]
    hyper = ForestHyper(
        n_trees=hy["n_trees"],
        max_depth=hy["max_depth"],
        min_samples_leaf=hy["min_samples_leaf"],
        features_per_split=hy["features_per_split"],
        seed=hy["seed"],
        bootstrap=hy["bootstrap"],
    )
    trees = []
    for td in doc["trees"]:
        trees.append(
            Tree(
                feature=np.array(td["feature"], dtype=np.int32),
                threshold=np.array(td["threshold"], dtype=np.float64),
                left=np.array(td["left"], dtype=np.int32),
                right=np.array(td["right"], dtype=np.int32),
                value=np.array(td["value"], dtype=np.float64),
                gain=np.array(td["gain"], dtype=np.float64),
            )
        )
    model = ForestModel(
        trees=trees,
        hyper=hyper,
        feature_names=tuple(doc["feature_names"]),
        family=Family(doc["family"]),
        training_digest=doc.get("training_digest", ""),
    )
    return model
