"""Multi-output regression forest mapping feature vectors to cost vectors.

Trees split on (feature, midpoint-threshold) pairs minimising the weighted
sum of squared deviations from the child means, summed over all outputs.
Training is deterministic for a fixed seed: tree i draws its bootstrap
sample and feature subsets from a generator seeded with seed + i, so any
degree of parallelism yields byte-identical models.
"""

from __future__ import annotations

import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .costs import SolverId
from .features import FEATURE_NAMES


class ModelFormatError(Exception):
    """Model JSON does not conform to the schema; message carries the path."""


def sample_weight(cost_vector):
    """Population standard deviation of one row's solver costs.

    Rows where the solvers differ a lot matter more during training; a row
    where every solver costs the same carries no ranking signal.
    """
    v = np.asarray(cost_vector, dtype=float)
    if v.size == 0:
        raise ValueError("empty cost vector")
    return float(np.sqrt(np.mean((v - v.mean()) ** 2)))


@dataclass(frozen=True)
class TrainingSet:
    """Aligned rows of (task, file key, features, costs, weight)."""

    task_ids: tuple[str, ...]
    files: tuple[str, ...]
    features: np.ndarray  # (n, n_features)
    costs: np.ndarray  # (n, len(roster))
    weights: np.ndarray  # (n,)
    roster: tuple[SolverId, ...]

    def __post_init__(self):
        n = len(self.task_ids)
        if not (len(self.files) == self.features.shape[0]
                == self.costs.shape[0] == self.weights.shape[0] == n):
            raise ValueError("training set arrays disagree on row count")
        if self.costs.shape[1] != len(self.roster):
            raise ValueError(f"cost vectors of width {self.costs.shape[1]}"
                             f" do not match roster size {len(self.roster)}")
        if not np.all(np.isfinite(self.features)):
            raise ValueError("non-finite feature value")
        if not np.all(np.isfinite(self.costs)):
            raise ValueError("non-finite cost value")
        if not np.all(np.isfinite(self.weights)) or np.any(self.weights < 0):
            raise ValueError("weights must be finite and non-negative")

    def __len__(self):
        return len(self.task_ids)

    @property
    def n_features(self):
        return self.features.shape[1]

    def subset(self, indices):
        idx = list(indices)
        return TrainingSet(
            task_ids=tuple(self.task_ids[i] for i in idx),
            files=tuple(self.files[i] for i in idx),
            features=self.features[idx],
            costs=self.costs[idx],
            weights=self.weights[idx],
            roster=self.roster,
        )


def make_training_set(rows, roster):
    """Build a TrainingSet from (task_id, file, features, costs, weight) rows."""
    if not rows:
        raise ValueError("no training rows")
    return TrainingSet(
        task_ids=tuple(r[0] for r in rows),
        files=tuple(r[1] for r in rows),
        features=np.array([r[2] for r in rows], dtype=float),
        costs=np.array([r[3] for r in rows], dtype=float),
        weights=np.array([r[4] for r in rows], dtype=float),
        roster=tuple(roster),
    )


@dataclass(frozen=True)
class Hyperparameters:
    trees: int = 100
    max_depth: int | None = None
    min_samples_leaf: int = 1
    max_features: int | None = None  # None: consider every feature
    bootstrap: bool = True

    def __post_init__(self):
        if self.trees < 1:
            raise ValueError("need at least 1 tree")
        if self.min_samples_leaf < 1:
            raise ValueError("min_samples_leaf must be >= 1")
        if self.max_depth is not None and self.max_depth < 0:
            raise ValueError("max_depth must be >= 0")


@dataclass(frozen=True)
class TreeNode:
    """Internal node (feature/threshold/left/right) or leaf (value)."""

    feature: int | None = None
    threshold: float | None = None
    left: "TreeNode | None" = None
    right: "TreeNode | None" = None
    value: tuple[float, ...] | None = None

    @property
    def is_leaf(self):
        return self.value is not None


def _leaf(Y, w):
    total = w.sum()
    if total > 0:
        mean = (w[:, None] * Y).sum(axis=0) / total
    else:
        mean = Y.mean(axis=0)
    return TreeNode(value=tuple(float(x) for x in mean))


def _split_candidates(xs):
    """Indices i where a threshold can sit between xs[i] and xs[i+1]."""
    return np.nonzero(xs[:-1] < xs[1:])[0]


# A candidate replaces the incumbent only when it improves the criterion by
# more than this relative margin; genuinely tied candidates therefore
# resolve to the first one visited (lowest feature index, then lowest
# threshold) no matter how the per-candidate arithmetic rounds.
SPLIT_TIE_MARGIN = 1e-9


def _best_split(X, Y, w, feature_order, min_leaf):
    """Lowest weighted-SSE (feature, threshold) over all midpoints.

    Candidates are visited features-ascending, thresholds-ascending, and a
    later candidate wins only by beating the incumbent by the tie margin
    (relative to the node's total weighted second moment), which makes the
    choice reproducible against exhaustive per-candidate enumeration.
    """
    n = X.shape[0]
    tolerance = SPLIT_TIE_MARGIN * float(np.sum(w[:, None] * Y * Y))
    best = None
    for j in feature_order:
        order = np.argsort(X[:, j], kind="stable")
        xs = X[order, j]
        ys = Y[order]
        ws = w[order]
        cut_idx = _split_candidates(xs)
        if cut_idx.size == 0:
            continue
        cw = np.cumsum(ws)
        cwy = np.cumsum(ws[:, None] * ys, axis=0)
        cwy2 = np.cumsum(ws[:, None] * ys * ys, axis=0)
        total_w, total_wy, total_wy2 = cw[-1], cwy[-1], cwy2[-1]
        for i in cut_idx:
            left_n = i + 1
            if left_n < min_leaf or n - left_n < min_leaf:
                continue
            lw = cw[i]
            rw = total_w - lw
            sse = 0.0
            if lw > 0:
                sse += float(np.sum(cwy2[i] - cwy[i] ** 2 / lw))
            if rw > 0:
                rwy = total_wy - cwy[i]
                rwy2 = total_wy2 - cwy2[i]
                sse += float(np.sum(rwy2 - rwy ** 2 / rw))
            if best is None or sse < best[0] - tolerance:
                threshold = (float(xs[i]) + float(xs[i + 1])) / 2.0
                best = (sse, j, threshold)
    if best is None:
        return None
    return best[1], best[2]


def _considered_features(n_features, hp, rng):
    if hp.max_features is None or hp.max_features >= n_features:
        return range(n_features)
    chosen = rng.choice(n_features, size=hp.max_features, replace=False)
    return sorted(int(j) for j in chosen)


def _build(X, Y, w, depth, hp, rng):
    n = X.shape[0]
    if n < 2 * hp.min_samples_leaf:
        return _leaf(Y, w)
    if hp.max_depth is not None and depth >= hp.max_depth:
        return _leaf(Y, w)
    if np.all(Y == Y[0]):
        return _leaf(Y, w)
    split = _best_split(X, Y, w, _considered_features(X.shape[1], hp, rng),
                        hp.min_samples_leaf)
    if split is None:
        return _leaf(Y, w)
    j, threshold = split
    mask = X[:, j] <= threshold
    left = _build(X[mask], Y[mask], w[mask], depth + 1, hp, rng)
    right = _build(X[~mask], Y[~mask], w[~mask], depth + 1, hp, rng)
    return TreeNode(feature=j, threshold=threshold, left=left, right=right)


def train_tree(ts: TrainingSet, hp: Hyperparameters | None = None, seed=0):
    """Fit one tree on the full training set (no bootstrap)."""
    hp = hp or Hyperparameters(trees=1)
    if len(ts) == 0:
        raise ValueError("empty training set")
    rng = np.random.default_rng(seed)
    return _build(ts.features, ts.costs, ts.weights, 0, hp, rng)


def _train_one(ts, hp, seed, index):
    rng = np.random.default_rng(seed + index)
    if hp.bootstrap:
        idx = rng.integers(0, len(ts), size=len(ts))
        X = ts.features[idx]
        Y = ts.costs[idx]
        w = ts.weights[idx]
    else:
        X, Y, w = ts.features, ts.costs, ts.weights
    return _build(X, Y, w, 0, hp, rng)


@dataclass
class ForestModel:
    trees: list[TreeNode]
    roster: tuple[SolverId, ...]
    feature_names: tuple[str, ...]
    seed: int
    hyperparameters: Hyperparameters

    def __post_init__(self):
        if not self.trees:
            raise ValueError("a model needs at least 1 tree")


def train_forest(ts: TrainingSet, hp: Hyperparameters | None = None,
                 seed=0, jobs=1, feature_names=None):
    """Train a forest; tree i derives its randomness from seed + i.

    The result is identical whatever jobs is set to, because every tree's
    work is self-contained.
    """
    hp = hp or Hyperparameters()
    if len(ts) < 2:
        raise ValueError(f"need at least 2 training rows, got {len(ts)}")
    if feature_names is None:
        if ts.n_features != len(FEATURE_NAMES):
            raise ValueError(f"{ts.n_features} features but no feature names"
                             " given")
        feature_names = FEATURE_NAMES
    if len(feature_names) != ts.n_features:
        raise ValueError("feature_names length does not match feature count")
    indices = range(hp.trees)
    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            trees = list(pool.map(lambda i: _train_one(ts, hp, seed, i),
                                  indices))
    else:
        trees = [_train_one(ts, hp, seed, i) for i in indices]
    return ForestModel(trees=trees, roster=ts.roster,
                       feature_names=tuple(feature_names), seed=seed,
                       hyperparameters=hp)


def _descend(node, x):
    while not node.is_leaf:
        node = node.left if x[node.feature] <= node.threshold else node.right
    return node.value


def predict(model: ForestModel, features):
    """Mean over trees of the leaf vector each tree routes the input to."""
    x = np.asarray(features, dtype=float)
    if x.shape != (len(model.feature_names),):
        raise ValueError(f"expected {len(model.feature_names)} features,"
                         f" got shape {x.shape}")
    if not np.all(np.isfinite(x)):
        raise ValueError("non-finite feature value")
    leaves = np.array([_descend(t, x) for t in model.trees], dtype=float)
    return leaves.mean(axis=0)


def predict_ranking(model: ForestModel, features):
    """Roster sorted by ascending predicted cost; ties keep roster order."""
    costs = predict(model, features)
    order = sorted(range(len(model.roster)), key=lambda i: (costs[i], i))
    return [model.roster[i] for i in order]


def kfold_splits(ts: TrainingSet, k=4, seed=0):
    """Partition rows into k folds by file key, never splitting a file.

    Returns [(train, validation)] with fold sizes differing by at most one
    file.
    """
    files = sorted(set(ts.files))
    if len(files) < k:
        raise ValueError(f"need at least {k} distinct files, got {len(files)}")
    rng = np.random.default_rng(seed)
    files = [files[i] for i in rng.permutation(len(files))]
    q, r = divmod(len(files), k)
    folds, start = [], 0
    for i in range(k):
        size = q + (1 if i < r else 0)
        folds.append(set(files[start:start + size]))
        start += size
    splits = []
    for fold in folds:
        val_idx = [i for i, f in enumerate(ts.files) if f in fold]
        train_idx = [i for i, f in enumerate(ts.files) if f not in fold]
        splits.append((ts.subset(train_idx), ts.subset(val_idx)))
    return splits


# ---------------------------------------------------------------------------
# JSON model format
# ---------------------------------------------------------------------------

FORMAT_VERSION = 1


def _node_to_json(node):
    if node.is_leaf:
        return {"value": list(node.value)}
    return {"feature": node.feature, "threshold": node.threshold,
            "left": _node_to_json(node.left),
            "right": _node_to_json(node.right)}


def serialize(model: ForestModel) -> str:
    doc = {
        "format_version": FORMAT_VERSION,
        "solvers": [{"name": s.name, "version": s.version}
                    for s in model.roster],
        "feature_names": list(model.feature_names),
        "seed": model.seed,
        "hyperparameters": {
            "trees": model.hyperparameters.trees,
            "max_depth": model.hyperparameters.max_depth,
            "min_samples_leaf": model.hyperparameters.min_samples_leaf,
        },
        "trees": [_node_to_json(t) for t in model.trees],
    }
    return json.dumps(doc)


def _need(obj, key, types, path):
    if not isinstance(obj, dict):
        raise ModelFormatError(f"{path}: expected an object")
    if key not in obj:
        raise ModelFormatError(f"{path}.{key}: missing")
    value = obj[key]
    if not isinstance(value, types) or isinstance(value, bool):
        raise ModelFormatError(f"{path}.{key}: expected {types}, got"
                               f" {type(value).__name__}")
    return value


def _node_from_json(obj, path, n_features, n_outputs):
    if not isinstance(obj, dict):
        raise ModelFormatError(f"{path}: expected an object")
    if "value" in obj:
        value = obj["value"]
        if not isinstance(value, list) or len(value) != n_outputs:
            raise ModelFormatError(f"{path}.value: expected a list of"
                                   f" {n_outputs} numbers")
        out = []
        for i, x in enumerate(value):
            if not isinstance(x, (int, float)) or isinstance(x, bool) \
                    or not np.isfinite(x):
                raise ModelFormatError(f"{path}.value[{i}]: expected a finite"
                                       " number")
            out.append(float(x))
        return TreeNode(value=tuple(out))
    feature = _need(obj, "feature", int, path)
    if not 0 <= feature < n_features:
        raise ModelFormatError(f"{path}.feature: index {feature} out of"
                               f" range [0, {n_features})")
    threshold = _need(obj, "threshold", (int, float), path)
    left = _node_from_json(_need(obj, "left", dict, path), f"{path}.left",
                           n_features, n_outputs)
    right = _node_from_json(_need(obj, "right", dict, path), f"{path}.right",
                            n_features, n_outputs)
    return TreeNode(feature=feature, threshold=float(threshold),
                    left=left, right=right)


def deserialize(text: str) -> ForestModel:
    """Parse model JSON, raising ModelFormatError with a JSON path."""
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as e:
        raise ModelFormatError(f"$: not valid JSON ({e})") from None
    version = _need(doc, "format_version", int, "$")
    if version != FORMAT_VERSION:
        raise ModelFormatError(f"$.format_version: unsupported version"
                               f" {version}")
    solvers_json = _need(doc, "solvers", list, "$")
    roster = []
    for i, s in enumerate(solvers_json):
        name = _need(s, "name", str, f"$.solvers[{i}]")
        ver = _need(s, "version", str, f"$.solvers[{i}]")
        roster.append(SolverId(name=name, version=ver))
    if not roster:
        raise ModelFormatError("$.solvers: must not be empty")
    names = _need(doc, "feature_names", list, "$")
    for i, n in enumerate(names):
        if not isinstance(n, str):
            raise ModelFormatError(f"$.feature_names[{i}]: expected a string")
    seed = _need(doc, "seed", int, "$")
    hp_json = _need(doc, "hyperparameters", dict, "$")
    trees_n = _need(hp_json, "trees", int, "$.hyperparameters")
    if "max_depth" not in hp_json:
        raise ModelFormatError("$.hyperparameters.max_depth: missing")
    if hp_json["max_depth"] is not None:
        max_depth = _need(hp_json, "max_depth", int, "$.hyperparameters")
    else:
        max_depth = None
    min_leaf = _need(hp_json, "min_samples_leaf", int, "$.hyperparameters")
    hp = Hyperparameters(trees=trees_n, max_depth=max_depth,
                         min_samples_leaf=min_leaf)
    trees_json = _need(doc, "trees", list, "$")
    if not trees_json:
        raise ModelFormatError("$.trees: must not be empty")
    trees = [_node_from_json(t, f"$.trees[{i}]", len(names), len(roster))
             for i, t in enumerate(trees_json)]
    return ForestModel(trees=trees, roster=tuple(roster),
                       feature_names=tuple(names), seed=seed,
                       hyperparameters=hp)


def load_model(path):
    try:
        with open(path) as fh:
            text = fh.read()
    except OSError as e:
        raise ModelFormatError(f"cannot read model {path}: {e}") from None
    try:
        return deserialize(text)
    except ModelFormatError as e:
        raise ModelFormatError(f"{path}: {e}") from None


def save_model(model, path):
    import os
    import tempfile
    text = serialize(model)
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=directory, suffix=".tmp")
    try:
        with os.fdopen(fd, "w") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        os.unlink(tmp)
        raise
