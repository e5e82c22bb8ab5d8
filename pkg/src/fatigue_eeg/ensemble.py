"""Bootstrap-aggregated CART trees with majority-vote prediction.

Randomness: every tree t draws its bootstrap sample from numpy's PCG64
generator seeded with ``SeedSequence([seed, t])``, so tree t does not depend
on the ensemble size or on the order in which trees are built.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from ._cart import grow_tree
from .features import (
    N_FEATURES,
    FeatureVector,
    LabeledDataset,
    Normalizer,
    WindowingConfig,
    apply_normalizer,
    fit_normalizer,
)
from .mcd import MCDConfig

SCHEMA_VERSION = "1"
SUPPORTED_VERSIONS = (SCHEMA_VERSION,)
TIE_RULES = {"alert": 0, "fatigue": 1}


class ModelFormatError(ValueError):
    """A model document is malformed or has an unsupported schema."""


def gini_impurity(counts) -> float:
    n0, n1 = (int(c) for c in counts)
    n = n0 + n1
    if n0 < 0 or n1 < 0 or n == 0:
        raise ValueError("gini impurity needs a non-empty node")
    return 1.0 - (n0 / n) ** 2 - (n1 / n) ** 2


@dataclass(frozen=True)
class TreeLimits:
    max_depth: Optional[int] = None
    min_leaf: int = 1

    def __post_init__(self):
        if self.max_depth is not None and self.max_depth < 0:
            raise ValueError("max_depth must be non-negative")
        if self.min_leaf < 1:
            raise ValueError("min_leaf must be at least 1")


@dataclass(eq=False)
class Tree:
    """Flat node arrays; ``feature == -1`` marks a leaf. Node 0 is the root."""

    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    counts: np.ndarray

    @property
    def n_nodes(self) -> int:
        return self.feature.shape[0]

    @property
    def leaf_class(self) -> np.ndarray:
        # argmax of class counts, ties to class 0
        return (self.counts[:, 1] > self.counts[:, 0]).astype(np.int64)

    def apply(self, X: np.ndarray) -> np.ndarray:
        """Leaf index reached by every row of ``X``."""
        node = np.zeros(X.shape[0], dtype=np.int64)
        active = np.flatnonzero(self.feature[node] >= 0)
        while active.size:
            cur = node[active]
            go_left = X[active, self.feature[cur]] < self.threshold[cur]
            node[active] = np.where(go_left, self.left[cur], self.right[cur])
            active = active[self.feature[node[active]] >= 0]
        return node

    def predict(self, X: np.ndarray) -> np.ndarray:
        return self.leaf_class[self.apply(np.atleast_2d(X))]

    def depth(self) -> int:
        best = 0
        stack = [(0, 0)]
        while stack:
            i, d = stack.pop()
            best = max(best, d)
            if self.feature[i] >= 0:
                stack.append((int(self.left[i]), d + 1))
                stack.append((int(self.right[i]), d + 1))
        return best

    def to_dict(self, i: int = 0) -> dict:
        if self.feature[i] < 0:
            c0, c1 = (int(c) for c in self.counts[i])
            return {"class": int(c1 > c0), "counts": [c0, c1]}
        return {
            "feature": int(self.feature[i]),
            "threshold": float(self.threshold[i]),
            "left": self.to_dict(int(self.left[i])),
            "right": self.to_dict(int(self.right[i])),
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "Tree":
        feature, threshold, left, right, counts = [], [], [], [], []

        def visit(d) -> int:
            if not isinstance(d, dict):
                raise ModelFormatError("tree node must be an object")
            i = len(feature)
            feature.append(-1)
            threshold.append(0.0)
            left.append(-1)
            right.append(-1)
            counts.append([0, 0])
            if "counts" in d:
                c = d["counts"]
                if (not isinstance(c, list) or len(c) != 2
                        or not all(isinstance(v, int) and v >= 0 for v in c)):
                    raise ModelFormatError("leaf counts must be two non-negative integers")
                if d.get("class") != int(c[1] > c[0]):
                    raise ModelFormatError("leaf class disagrees with its counts")
                counts[i] = c
                return i
            try:
                f = d["feature"]
                t = float(d["threshold"])
            except (KeyError, TypeError, ValueError):
                raise ModelFormatError("split node needs 'feature' and numeric 'threshold'") from None
            if not isinstance(f, int) or not 0 <= f < N_FEATURES:
                raise ModelFormatError(f"feature index {f!r} out of range 0..{N_FEATURES - 1}")
            if not np.isfinite(t):
                raise ModelFormatError("split threshold must be finite")
            feature[i] = f
            threshold[i] = t
            if "left" not in d or "right" not in d:
                raise ModelFormatError("split node needs 'left' and 'right' children")
            left[i] = visit(d["left"])
            right[i] = visit(d["right"])
            counts[i] = [counts[left[i]][0] + counts[right[i]][0],
                         counts[left[i]][1] + counts[right[i]][1]]
            return i

        visit(doc)
        return cls(np.array(feature, dtype=np.int64), np.array(threshold, dtype=np.float64),
                   np.array(left, dtype=np.int64), np.array(right, dtype=np.int64),
                   np.array(counts, dtype=np.int64).reshape(-1, 2))


def _as_training_arrays(rows, labels) -> tuple[np.ndarray, np.ndarray]:
    X = np.ascontiguousarray(np.asarray(rows, dtype=np.float64))
    y = np.ascontiguousarray(np.asarray(labels, dtype=np.int64))
    if X.ndim != 2 or X.shape[0] == 0:
        raise ValueError("cannot train a tree on an empty dataset")
    if X.shape[1] != N_FEATURES:
        raise ValueError(f"expected {N_FEATURES} features per row, got {X.shape[1]}")
    if y.shape != (X.shape[0],) or not np.all((y == 0) | (y == 1)):
        raise ValueError("labels must be a 0/1 vector matching the rows")
    if not np.all(np.isfinite(X)):
        raise ValueError("training rows contain non-finite values")
    return X, y


def train_tree(rows, labels, limits: TreeLimits = TreeLimits()) -> Tree:
    X, y = _as_training_arrays(rows, labels)
    depth = -1 if limits.max_depth is None else limits.max_depth
    return Tree(*grow_tree(X, y, depth, limits.min_leaf))


def tree_rng(seed: int, index: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([seed, index]))


def bootstrap_sample(n: int, rng: np.random.Generator) -> np.ndarray:
    if n < 1:
        raise ValueError("bootstrap needs at least one row")
    return rng.integers(0, n, size=n)


@dataclass(eq=False)
class BaggedModel:
    trees: list
    seed: int
    normalizer: Normalizer
    channel_name: str = ""
    windowing: WindowingConfig = field(default_factory=WindowingConfig)
    mcd: MCDConfig = field(default_factory=MCDConfig)
    limits: TreeLimits = field(default_factory=TreeLimits)
    tie: str = "alert"

    def __post_init__(self):
        if len(self.trees) < 1:
            raise ValueError("an ensemble needs at least one tree")
        if self.tie not in TIE_RULES:
            raise ValueError(f"tie rule must be one of {sorted(TIE_RULES)}")

    @property
    def ensemble_size(self) -> int:
        return len(self.trees)


def train_ensemble(
    dataset: LabeledDataset,
    n_trees: int = 30,
    seed: int = 42,
    limits: TreeLimits = TreeLimits(),
    *,
    channel_name: str = "",
    windowing: WindowingConfig = WindowingConfig(),
    mcd: MCDConfig = MCDConfig(),
    tie: str = "alert",
    bootstrap: bool = True,
) -> BaggedModel:
    """Fit the normalizer on ``dataset`` and grow ``n_trees`` bagged trees.

    ``bootstrap=False`` trains every tree on the full dataset (test hook).
    """
    if n_trees < 1:
        raise ValueError("n_trees must be at least 1")
    if len(dataset) == 0:
        raise ValueError("cannot train on an empty dataset")
    nz = fit_normalizer(dataset)
    X, y = _as_training_arrays(apply_normalizer(nz, dataset.features), dataset.labels)
    trees = []
    for t in range(n_trees):
        if bootstrap:
            idx = bootstrap_sample(len(y), tree_rng(seed, t))
            trees.append(train_tree(X[idx], y[idx], limits))
        else:
            trees.append(train_tree(X, y, limits))
    return BaggedModel(trees, seed, nz, channel_name, windowing, mcd, limits, tie)


def tree_votes(model: BaggedModel, rows) -> np.ndarray:
    """(n_trees, n_rows) matrix of per-tree class votes on raw feature rows."""
    X = apply_normalizer(model.normalizer, rows)
    return np.vstack([t.predict(X) for t in model.trees])


def majority_vote(votes: np.ndarray, tie: str = "alert") -> tuple[np.ndarray, np.ndarray]:
    votes = np.atleast_2d(votes)
    n_trees = votes.shape[0]
    ones = votes.sum(axis=0)
    frac = ones / n_trees
    labels = np.where(2 * ones > n_trees, 1, 0)
    labels = np.where(2 * ones == n_trees, TIE_RULES[tie], labels)
    return labels.astype(np.int64), frac


def predict_rows(model: BaggedModel, rows) -> tuple[np.ndarray, np.ndarray]:
    """Labels and fraction of trees voting fatigue for raw (unnormalized) rows."""
    return majority_vote(tree_votes(model, rows), model.tie)


def predict(model: BaggedModel, row) -> tuple[int, float]:
    x = row.as_array() if isinstance(row, FeatureVector) else np.asarray(row, dtype=np.float64)
    labels, frac = predict_rows(model, x.reshape(1, -1))
    return int(labels[0]), float(frac[0])


# ---------------------------------------------------------------------------
# serialization


def to_document(model: BaggedModel) -> dict:
    config = {
        "window_s": model.windowing.window_s,
        "step_s": model.windowing.step_s,
        "alpha": model.mcd.alpha,
        "quantile_level": model.mcd.quantile_level,
        "max_depth": model.limits.max_depth,
        "min_leaf": model.limits.min_leaf,
        "tie": model.tie,
    }
    return {
        "version": SCHEMA_VERSION,
        "seed": int(model.seed),
        "ensemble_size": model.ensemble_size,
        "channel_name": model.channel_name,
        "normalizer": {
            "min": [float(v) for v in model.normalizer.minimum],
            "max": [float(v) for v in model.normalizer.maximum],
        },
        "config": config,
        "trees": [t.to_dict() for t in model.trees],
    }


def serialize(model: BaggedModel) -> bytes:
    # json writes floats with repr, the shortest exactly round-tripping form
    return (json.dumps(to_document(model), separators=(",", ":"), allow_nan=False) + "\n").encode("utf-8")


def _require(doc: dict, key: str, kind):
    if key not in doc:
        raise ModelFormatError(f"model document lacks {key!r}")
    val = doc[key]
    if not isinstance(val, kind) or isinstance(val, bool) and kind is not bool:
        raise ModelFormatError(f"model field {key!r} has the wrong type")
    return val


def from_document(doc) -> BaggedModel:
    if not isinstance(doc, dict):
        raise ModelFormatError("model document must be a JSON object")
    version = str(_require(doc, "version", (str, int)))
    if version not in SUPPORTED_VERSIONS:
        raise ModelFormatError(
            f"unsupported model schema version {version!r}; supported: {', '.join(SUPPORTED_VERSIONS)}"
        )
    seed = _require(doc, "seed", int)
    size = _require(doc, "ensemble_size", int)
    channel_name = _require(doc, "channel_name", str)
    nz_doc = _require(doc, "normalizer", dict)
    cfg = _require(doc, "config", dict)
    trees_doc = _require(doc, "trees", list)
    if size != len(trees_doc):
        raise ModelFormatError(f"ensemble_size {size} but {len(trees_doc)} trees")
    try:
        nz = Normalizer(np.array(nz_doc["min"], dtype=np.float64), np.array(nz_doc["max"], dtype=np.float64))
        windowing = WindowingConfig(float(cfg["window_s"]), float(cfg["step_s"]))
        mcd = MCDConfig(float(cfg["alpha"]), cfg.get("quantile_level"))
        limits = TreeLimits(cfg.get("max_depth"), int(cfg.get("min_leaf", 1)))
        tie = cfg.get("tie", "alert")
        trees = [Tree.from_dict(t) for t in trees_doc]
        return BaggedModel(trees, seed, nz, channel_name, windowing, mcd, limits, tie)
    except ModelFormatError:
        raise
    except (KeyError, TypeError, ValueError) as exc:
        raise ModelFormatError(f"malformed model document: {exc}") from None


def deserialize(blob: bytes | str) -> BaggedModel:
    try:
        doc = json.loads(blob)
    except (json.JSONDecodeError, UnicodeDecodeError) as exc:
        raise ModelFormatError(f"model document is not valid JSON: {exc}") from None
    return from_document(doc)


def save_model(model: BaggedModel, path) -> None:
    with open(path, "wb") as fh:
        fh.write(serialize(model))


def load_model(path) -> BaggedModel:
    with open(path, "rb") as fh:
        return deserialize(fh.read())
