"""From-scratch random-forest binary classifier.

Bootstrap-bagged decision trees with Gini splits and per-node feature
subsampling. Training is fully deterministic: every random draw comes from
a splitmix64 stream seeded by ``seed XOR tree_index``, so the same samples
and config produce bit-identical serialized models on any platform.

Prediction is the arithmetic mean over trees of the reached leaf's
positive-class frequency, which gives scores with enough granularity for
percentage badges in the UI.
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from datetime import datetime, timezone
from pathlib import Path
from typing import Sequence, Union

from .features import FEATURE_NAMES, FeatureVector
from .records import format_timestamp, parse_timestamp

MODEL_FORMAT_VERSION = "1"

_EPOCH = datetime(1970, 1, 1, tzinfo=timezone.utc)

_MASK64 = (1 << 64) - 1


class ForestError(Exception):
    pass


class EmptyTrainingSetError(ForestError):
    def __init__(self) -> None:
        super().__init__("training set is empty")


class SingleClassDataError(ForestError):
    def __init__(self, label: int):
        super().__init__(f"training set contains only label {label}")
        self.label = label


class DimensionMismatchError(ForestError):
    def __init__(self, expected: int, got: int):
        super().__init__(f"expected {expected} features, got {got}")
        self.expected = expected
        self.got = got


class BadVersionError(ForestError):
    def __init__(self, found: str):
        super().__init__(f"unsupported model format version {found!r}")
        self.found = found


class FeatureOrderMismatchError(ForestError):
    def __init__(self, found: Sequence[str]):
        super().__init__(f"model feature_names {list(found)!r} do not match {list(FEATURE_NAMES)!r}")
        self.found = tuple(found)


class ModelFormatError(ForestError):
    pass


class SplitMix64:
    """Deterministic 64-bit RNG stream (splitmix64)."""

    def __init__(self, seed: int):
        self._state = seed & _MASK64

    def next_u64(self) -> int:
        self._state = (self._state + 0x9E3779B97F4A7C15) & _MASK64
        z = self._state
        z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
        z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
        return z ^ (z >> 31)

    def next_below(self, n: int) -> int:
        return self.next_u64() % n

    def permutation(self, n: int) -> list[int]:
        items = list(range(n))
        for i in range(n - 1, 0, -1):
            j = self.next_below(i + 1)
            items[i], items[j] = items[j], items[i]
        return items


@dataclass(frozen=True)
class Leaf:
    counts: tuple[int, int]  # (negative, positive)

    @property
    def probability(self) -> float:
        return self.counts[1] / (self.counts[0] + self.counts[1])


@dataclass(frozen=True)
class Split:
    feature: int
    threshold: float
    left: "TreeNode"
    right: "TreeNode"


TreeNode = Union[Leaf, Split]


@dataclass(frozen=True)
class TrainConfig:
    n_trees: int = 100
    max_depth: int = 16
    min_samples_split: int = 2
    features_per_split: int = 3  # ceil(sqrt(6)) for the canonical 6 features
    seed: int = 42

    def __post_init__(self) -> None:
        for name in ("n_trees", "max_depth", "min_samples_split", "features_per_split"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be positive")


@dataclass(frozen=True)
class ForestModel:
    trees: tuple[TreeNode, ...]
    feature_names: tuple[str, ...]
    n_trees: int
    seed: int
    version: str = MODEL_FORMAT_VERSION
    trained_at: datetime = _EPOCH


def gini_impurity(neg: int, pos: int) -> float:
    """Gini impurity of a two-class count pair; 0 for a pure node."""
    total = neg + pos
    if total == 0:
        return 0.0
    return 1.0 - (neg * neg + pos * pos) / (total * total)


def _grow_tree(
    x: list[Sequence[float]],
    y: list[int],
    indices: list[int],
    depth: int,
    config: TrainConfig,
    rng: SplitMix64,
    n_features: int,
) -> TreeNode:
    pos = sum(y[i] for i in indices)
    neg = len(indices) - pos
    if (
        pos == 0
        or neg == 0
        or len(indices) < config.min_samples_split
        or depth >= config.max_depth
    ):
        return Leaf((neg, pos))

    # Examine up to features_per_split usable features in a fresh random
    # order; features constant at this node are skipped without consuming
    # the budget, so an informative feature is always reachable.
    best_gain = -1.0
    best_feature = -1
    best_threshold = 0.0
    parent_gini = gini_impurity(neg, pos)
    total = len(indices)
    examined = 0
    for feature in rng.permutation(n_features):
        if examined >= config.features_per_split and best_feature >= 0:
            break
        ordered = sorted(indices, key=lambda i: x[i][feature])
        if x[ordered[0]][feature] == x[ordered[-1]][feature]:
            continue  # constant at this node
        examined += 1
        left_neg = 0
        left_pos = 0
        for k in range(total - 1):
            i = ordered[k]
            if y[i] == 1:
                left_pos += 1
            else:
                left_neg += 1
            value = x[i][feature]
            next_value = x[ordered[k + 1]][feature]
            if value == next_value:
                continue
            threshold = (value + next_value) / 2.0
            n_left = k + 1
            n_right = total - n_left
            child_gini = (
                n_left * gini_impurity(left_neg, left_pos)
                + n_right * gini_impurity(neg - left_neg, pos - left_pos)
            ) / total
            gain = parent_gini - child_gini
            # Ties resolve to the lowest feature index, then lowest threshold.
            if gain > best_gain or (
                gain == best_gain
                and (feature, threshold) < (best_feature, best_threshold)
            ):
                best_gain = gain
                best_feature = feature
                best_threshold = threshold

    if best_feature < 0:
        return Leaf((neg, pos))

    left_idx = [i for i in indices if x[i][best_feature] <= best_threshold]
    right_idx = [i for i in indices if x[i][best_feature] > best_threshold]
    left = _grow_tree(x, y, left_idx, depth + 1, config, rng, n_features)
    right = _grow_tree(x, y, right_idx, depth + 1, config, rng, n_features)
    return Split(best_feature, best_threshold, left, right)


def _as_row(features: FeatureVector | Sequence[float]) -> Sequence[float]:
    if isinstance(features, FeatureVector):
        return features.as_list()
    return features


def train(
    samples: Sequence[tuple[FeatureVector | Sequence[float], int]],
    config: TrainConfig = TrainConfig(),
    trained_at: datetime | None = None,
) -> ForestModel:
    """Train a forest on (feature vector, {0,1} label) samples.

    ``trained_at`` defaults to the Unix epoch so that training is
    byte-reproducible; pass a real timestamp to record when the model
    was actually built.
    """
    if not samples:
        raise EmptyTrainingSetError()
    x = [_as_row(f) for f, _ in samples]
    y = [int(label) for _, label in samples]
    if any(label not in (0, 1) for label in y):
        raise ValueError("labels must be 0 or 1")
    if len(set(y)) < 2:
        raise SingleClassDataError(y[0])
    n_features = len(FEATURE_NAMES)
    for row in x:
        if len(row) != n_features:
            raise DimensionMismatchError(n_features, len(row))

    n = len(samples)
    trees: list[TreeNode] = []
    for tree_index in range(config.n_trees):
        rng = SplitMix64(config.seed ^ tree_index)
        bootstrap = [rng.next_below(n) for _ in range(n)]
        trees.append(_grow_tree(x, y, bootstrap, 0, config, rng, n_features))

    return ForestModel(
        trees=tuple(trees),
        feature_names=FEATURE_NAMES,
        n_trees=config.n_trees,
        seed=config.seed,
        trained_at=trained_at if trained_at is not None else _EPOCH,
    )


def _tree_probability(node: TreeNode, row: Sequence[float]) -> float:
    while isinstance(node, Split):
        node = node.left if row[node.feature] <= node.threshold else node.right
    return node.probability


def predict_proba(model: ForestModel, features: FeatureVector | Sequence[float]) -> float:
    """Mean over trees of the reached leaf's positive-class frequency."""
    row = _as_row(features)
    if len(row) != len(model.feature_names):
        raise DimensionMismatchError(len(model.feature_names), len(row))
    return sum(_tree_probability(tree, row) for tree in model.trees) / len(model.trees)


def _flatten_tree(root: TreeNode) -> list[dict]:
    nodes: list[dict] = []

    def visit(node: TreeNode) -> int:
        index = len(nodes)
        nodes.append({})
        if isinstance(node, Leaf):
            nodes[index] = {"counts": [node.counts[0], node.counts[1]]}
        else:
            left = visit(node.left)
            right = visit(node.right)
            nodes[index] = {"f": node.feature, "t": node.threshold, "l": left, "r": right}
        return index

    visit(root)
    return nodes


def _build_tree(nodes: list, index: int, visited: set[int]) -> TreeNode:
    if not 0 <= index < len(nodes):
        raise ModelFormatError(f"node index {index} out of range")
    if index in visited:
        raise ModelFormatError(f"node index {index} referenced twice")
    visited.add(index)
    node = nodes[index]
    if not isinstance(node, dict):
        raise ModelFormatError("node must be an object")
    if "counts" in node:
        counts = node["counts"]
        if (
            not isinstance(counts, list)
            or len(counts) != 2
            or any(not isinstance(c, int) or c < 0 for c in counts)
            or counts[0] + counts[1] < 1
        ):
            raise ModelFormatError(f"bad leaf counts {counts!r}")
        return Leaf((counts[0], counts[1]))
    try:
        feature = int(node["f"])
        threshold = float(node["t"])
        left = _build_tree(nodes, int(node["l"]), visited)
        right = _build_tree(nodes, int(node["r"]), visited)
    except (KeyError, TypeError, ValueError) as exc:
        raise ModelFormatError(f"bad internal node at index {index}: {exc}") from None
    if not 0 <= feature < len(FEATURE_NAMES):
        raise ModelFormatError(f"feature index {feature} out of range")
    return Split(feature, threshold, left, right)


def model_to_json_bytes(model: ForestModel) -> bytes:
    document = {
        "version": model.version,
        "feature_names": list(model.feature_names),
        "n_trees": model.n_trees,
        "seed": model.seed,
        "trained_at": format_timestamp(model.trained_at),
        "trees": [_flatten_tree(tree) for tree in model.trees],
    }
    return (json.dumps(document, separators=(",", ":")) + "\n").encode("utf-8")


def model_from_json_bytes(data: bytes) -> ForestModel:
    try:
        document = json.loads(data)
    except json.JSONDecodeError as exc:
        raise ModelFormatError(f"invalid model JSON: {exc.msg}") from None
    if not isinstance(document, dict):
        raise ModelFormatError("model document must be an object")
    version = str(document.get("version"))
    if version != MODEL_FORMAT_VERSION:
        raise BadVersionError(version)
    names = document.get("feature_names")
    if tuple(names or ()) != FEATURE_NAMES:
        raise FeatureOrderMismatchError(names or ())
    raw_trees = document.get("trees")
    n_trees = document.get("n_trees")
    if not isinstance(raw_trees, list) or not raw_trees:
        raise ModelFormatError("model has no trees")
    if n_trees != len(raw_trees):
        raise ModelFormatError(f"n_trees {n_trees!r} does not match {len(raw_trees)} trees")
    trees = tuple(_build_tree(nodes, 0, set()) for nodes in raw_trees)
    return ForestModel(
        trees=trees,
        feature_names=FEATURE_NAMES,
        n_trees=len(trees),
        seed=int(document.get("seed", 0)),
        version=version,
        trained_at=parse_timestamp(str(document.get("trained_at", "1970-01-01T00:00:00Z"))),
    )


def save_model(model: ForestModel, path: str | Path) -> None:
    Path(path).write_bytes(model_to_json_bytes(model))


def load_model(path: str | Path) -> ForestModel:
    return model_from_json_bytes(Path(path).read_bytes())
