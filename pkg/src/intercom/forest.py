"""Bagged decision-tree ensemble with per-node feature subsampling."""
from __future__ import annotations

import pickle
from dataclasses import dataclass, field

import numpy as np

FOREST_FORMAT = "intercom-forest"
FOREST_VERSION = 1


class SchemaError(ValueError):
    """Feature schema does not match the one the model was trained with."""


@dataclass
class _Node:
    feature: int = -1
    threshold: float = 0.0
    left: "_Node | None" = None
    right: "_Node | None" = None
    proba: np.ndarray | None = None  # leaf class-probability estimates


def _best_split(X, y_codes, idx, n_classes, features):
    """Best (impurity gain, feature, threshold) over the candidate features.

    Maximizes sum(left_counts^2)/|left| + sum(right_counts^2)/|right|, which
    is equivalent to minimizing weighted Gini impurity.
    """
    n = idx.size
    total = np.bincount(y_codes[idx], minlength=n_classes).astype(np.float64)
    base = float(np.dot(total, total)) / n
    best = None
    for f in features:
        vals = X[idx, f]
        order = np.argsort(vals, kind="stable")
        sv = vals[order]
        cut = np.nonzero(sv[:-1] < sv[1:])[0]
        if cut.size == 0:
            continue
        onehot = np.zeros((n, n_classes))
        onehot[np.arange(n), y_codes[idx][order]] = 1.0
        cum = np.cumsum(onehot, axis=0)
        left = cum[cut]
        right = total - left
        left_n = (cut + 1).astype(np.float64)
        right_n = n - left_n
        score = (left * left).sum(axis=1) / left_n + (right * right).sum(axis=1) / right_n
        k = int(np.argmax(score))
        if score[k] > base + 1e-12 and (best is None or score[k] > best[0] + 1e-12):
            pos = cut[k]
            best = (float(score[k]), f, float((sv[pos] + sv[pos + 1]) / 2.0))
    return best


def _grow_tree(X, y_codes, idx, n_classes, mtry, rng) -> _Node:
    root = _Node()
    stack = [(root, idx)]
    n_features = X.shape[1]
    while stack:
        node, node_idx = stack.pop()
        counts = np.bincount(y_codes[node_idx], minlength=n_classes)
        if node_idx.size < 2 or np.count_nonzero(counts) == 1:
            node.proba = counts / counts.sum()
            continue
        features = rng.choice(n_features, size=mtry, replace=False)
        split = _best_split(X, y_codes, node_idx, n_classes, features)
        if split is None:
            node.proba = counts / counts.sum()
            continue
        _, node.feature, node.threshold = split
        mask = X[node_idx, node.feature] < node.threshold
        node.left, node.right = _Node(), _Node()
        stack.append((node.left, node_idx[mask]))
        stack.append((node.right, node_idx[~mask]))
    return root


def _tree_proba(root: _Node, X: np.ndarray) -> np.ndarray:
    n = X.shape[0]
    out = None
    stack = [(root, np.arange(n))]
    while stack:
        node, idx = stack.pop()
        if node.proba is not None:
            if out is None:
                out = np.zeros((n, node.proba.size))
            out[idx] = node.proba
            continue
        mask = X[idx, node.feature] < node.threshold
        stack.append((node.left, idx[mask]))
        stack.append((node.right, idx[~mask]))
    return out


@dataclass
class Forest:
    """Trained ensemble; axis-aligned trees over a fixed feature schema."""

    trees: list[_Node]
    schema: tuple[str, ...]
    classes: tuple
    seed: int
    oob_accuracy: float | None = None
    metadata: dict = field(default_factory=dict)

    def _to_matrix(self, X) -> np.ndarray:
        if isinstance(X, dict):
            X = [X]
        if isinstance(X, np.ndarray):
            if X.ndim == 1:
                X = X[None, :]
            if X.shape[1] != len(self.schema):
                raise SchemaError(
                    f"expected {len(self.schema)} features, got {X.shape[1]}"
                )
            return np.asarray(X, dtype=np.float64)
        rows = []
        for fv in X:
            if tuple(fv.keys()) != self.schema:
                raise SchemaError("feature vector keys do not match the trained schema")
            rows.append([fv[k] for k in self.schema])
        return np.asarray(rows, dtype=np.float64)

    def predict_proba(self, X) -> np.ndarray:
        """Class probabilities, rows aligned with ``self.classes``."""
        mat = self._to_matrix(X)
        acc = np.zeros((mat.shape[0], len(self.classes)))
        for tree in self.trees:
            acc += _tree_proba(tree, mat)
        return acc / len(self.trees)

    def predict(self, X) -> list:
        proba = self.predict_proba(X)
        return [self.classes[i] for i in np.argmax(proba, axis=1)]

    def save(self, path) -> None:
        payload = {
            "format": FOREST_FORMAT,
            "version": FOREST_VERSION,
            "forest": self,
        }
        with open(path, "wb") as fh:
            pickle.dump(payload, fh)


def load_forest(path) -> Forest:
    with open(path, "rb") as fh:
        payload = pickle.load(fh)
    if not isinstance(payload, dict) or payload.get("format") != FOREST_FORMAT:
        raise ValueError(f"{path} is not a forest model file")
    if payload.get("version") != FOREST_VERSION:
        raise ValueError(f"unsupported forest version {payload.get('version')}")
    return payload["forest"]


def _validate_features(X) -> tuple[np.ndarray, tuple[str, ...]]:
    if len(X) == 0:
        raise ValueError("empty training set")
    schema = tuple(X[0].keys())
    rows = []
    for fv in X:
        if tuple(fv.keys()) != schema:
            raise SchemaError("inconsistent feature schemas in training set")
        rows.append([fv[k] for k in schema])
    mat = np.asarray(rows, dtype=np.float64)
    if not np.isfinite(mat).all():
        raise ValueError("feature matrix contains NaN or inf")
    return mat, schema


def train_forest(X, y, trees: int = 400, seed: int = 0) -> Forest:
    """Fit a bagged forest: bootstrap per tree, sqrt(F) features per node,
    unlimited depth, leaf size 1. Out-of-bag accuracy is recorded when any
    sample lands out of bag. Bit-reproducible for a fixed seed."""
    mat, schema = _validate_features(X)
    n, n_feat = mat.shape
    if len(y) != n:
        raise ValueError("X and y length mismatch")
    if n < 2:
        raise ValueError("need at least 2 training samples")
    classes = tuple(sorted(set(y)))
    if len(classes) < 2:
        raise ValueError("training labels contain a single class")
    code = {c: i for i, c in enumerate(classes)}
    y_codes = np.asarray([code[v] for v in y], dtype=np.intp)
    mtry = max(1, int(np.sqrt(n_feat)))

    grown = []
    oob_votes = np.zeros((n, len(classes)))
    oob_seen = np.zeros(n, dtype=bool)
    for seq in np.random.SeedSequence(seed).spawn(trees):
        rng = np.random.default_rng(seq)
        boot = rng.integers(0, n, size=n)
        tree = _grow_tree(mat, y_codes, boot, len(classes), mtry, rng)
        grown.append(tree)
        oob = np.setdiff1d(np.arange(n), boot, assume_unique=False)
        if oob.size:
            oob_votes[oob] += _tree_proba(tree, mat[oob])
            oob_seen[oob] = True

    oob_accuracy = None
    if oob_seen.any():
        pred = np.argmax(oob_votes[oob_seen], axis=1)
        oob_accuracy = float(np.mean(pred == y_codes[oob_seen]))

    return Forest(
        trees=grown,
        schema=schema,
        classes=classes,
        seed=seed,
        oob_accuracy=oob_accuracy,
        metadata={"n_samples": n, "n_trees": trees, "mtry": mtry},
    )
