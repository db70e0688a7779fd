"""From-scratch random-forest classifier for keyphrase classes.

Each token inside a keyphrase becomes one training row: the concatenation
``[prev; cur; next]`` of static word vectors, where prev/next are the
token's neighbours *within the span* and the unknown-word vector pads the
span edges.  A forest of Gini-split decision trees votes per token, and a
keyphrase takes the majority class of its tokens.  Ties anywhere resolve
by the fixed priority Material > Process > Task.
"""

from __future__ import annotations

import dataclasses
import json
import math
from pathlib import Path

import numpy as np

from .corpus import KEYPHRASE_CLASSES, Document, KeyphraseSpan, snap_spans
from .embed import EmbeddingTable, context_concat, lookup_sequence
from .errors import SealError

__all__ = [
    "ClassifierConfig",
    "TreeNode",
    "Forest",
    "EmptyTrainingSet",
    "DimMismatch",
    "CorruptForest",
    "build_training_set",
    "train_forest",
    "predict",
    "classify_keyphrase",
    "save_forest",
    "load_forest",
]


class EmptyTrainingSet(SealError):
    """No token inside any classed gold span: nothing to train on."""


class DimMismatch(SealError):
    """Feature matrix, labels, or query vector have inconsistent shapes."""


class CorruptForest(SealError):
    """A serialized forest fails structural validation."""


# Tie-break priority: higher index in KEYPHRASE_CLASSES wins, i.e.
# Material > Process > Task.
def _break_tie(counts) -> int:
    return max(range(len(counts)), key=lambda k: (counts[k], k))


@dataclasses.dataclass(frozen=True)
class ClassifierConfig:
    """Forest hyperparameters; ``features_per_split=0`` means ⌊√dim⌋."""

    n_trees: int = 200
    max_depth: int = 0  # 0 = unlimited
    min_samples_split: int = 2
    features_per_split: int = 0
    bootstrap: bool = True
    seed: int = 42
    classes: tuple[str, ...] = KEYPHRASE_CLASSES

    def __post_init__(self) -> None:
        if self.n_trees < 1:
            raise ValueError(f"n_trees must be >= 1, got {self.n_trees}")
        if self.min_samples_split < 2:
            raise ValueError(
                f"min_samples_split must be >= 2, got {self.min_samples_split}"
            )


@dataclasses.dataclass(frozen=True)
class TreeNode:
    """Internal node (``feature_index >= 0``) or leaf (``-1`` + counts)."""

    feature_index: int = -1
    threshold: float = 0.0
    left: "TreeNode | None" = None
    right: "TreeNode | None" = None
    class_counts: tuple[int, ...] | None = None

    def __post_init__(self) -> None:
        if self.feature_index >= 0:
            if self.left is None or self.right is None:
                raise ValueError("internal node must have both children")
            if self.class_counts is not None:
                raise ValueError("internal node carries no class counts")
        else:
            if self.left is not None or self.right is not None:
                raise ValueError("leaf must not have children")
            if self.class_counts is None or not any(self.class_counts):
                raise ValueError("leaf counts missing or all zero")

    @property
    def is_leaf(self) -> bool:
        return self.feature_index < 0


@dataclasses.dataclass(frozen=True)
class Forest:
    trees: list[TreeNode]
    config: ClassifierConfig
    n_features: int


# ---------------------------------------------------------------------------
# Training data
# ---------------------------------------------------------------------------


def build_training_set(
    docs: list[Document], table: EmbeddingTable
) -> tuple[np.ndarray, list[str]]:
    """One ``[prev;cur;next]`` row per token inside a classed gold span.

    Context stays inside the span: the first token's ``prev`` block and the
    last token's ``next`` block are the unknown-word vector.  Returns
    ``(X, y)`` with X of shape (N, 3*dim) and y the span class per row.
    """
    rows: list[np.ndarray] = []
    labels: list[str] = []
    for doc in docs:
        for span in snap_spans(doc):
            if span.klass is None:
                continue
            toks = [
                tok
                for tok in doc.tokens
                if tok.start >= span.start and tok.end <= span.end
            ]
            if not toks:
                continue
            vecs = lookup_sequence(table, toks)
            for i in range(len(toks)):
                rows.append(context_concat(vecs, i, table.unk))
                labels.append(span.klass)
    if not rows:
        raise EmptyTrainingSet("no tokens inside classed keyphrase spans")
    return np.stack(rows).astype(np.float32), labels


# ---------------------------------------------------------------------------
# Forest training
# ---------------------------------------------------------------------------


def _gini_terms(counts: np.ndarray, totals: np.ndarray) -> np.ndarray:
    """``total * gini`` for each row of class counts (0 where total is 0)."""
    with np.errstate(invalid="ignore", divide="ignore"):
        sq = np.square(counts).sum(axis=-1) / np.where(totals > 0, totals, 1)
    return totals - sq


def _best_split(
    x_node: np.ndarray, y_node: np.ndarray, features: np.ndarray, n_classes: int
) -> tuple[float, int, float] | None:
    """Minimum weighted-Gini split over the given features.

    Returns ``(weighted_gini, feature, threshold)`` or None when no feature
    offers two distinct values.  Candidate thresholds are midpoints between
    consecutive distinct sorted values, rounded to float32 and clamped so
    the left/right partition survives the rounding.
    """
    n = x_node.shape[0]
    best: tuple[float, int, float] | None = None
    onehot = np.zeros((n, n_classes), dtype=np.int64)
    onehot[np.arange(n), y_node] = 1
    for f in features:
        values = x_node[:, f]
        order = np.argsort(values, kind="stable")
        sv = values[order]
        cum = np.cumsum(onehot[order], axis=0)  # counts among first i+1 rows
        boundary = np.nonzero(sv[:-1] != sv[1:])[0]
        if boundary.size == 0:
            continue
        left_counts = cum[boundary]
        left_n = (boundary + 1).astype(np.int64)
        right_counts = cum[-1] - left_counts
        right_n = n - left_n
        weighted = (
            _gini_terms(left_counts, left_n) + _gini_terms(right_counts, right_n)
        ) / n
        thresholds = ((sv[boundary].astype(np.float64) + sv[boundary + 1]) / 2).astype(
            np.float32
        )
        # float32 rounding may push the midpoint onto the right-hand value;
        # fall back to the left value so "<= threshold" keeps the same split
        bad = thresholds >= sv[boundary + 1]
        thresholds[bad] = sv[boundary][bad]
        k = int(np.argmin(weighted))
        cand = (float(weighted[k]), int(f), float(thresholds[k]))
        if best is None or cand[0] < best[0]:
            best = cand
    return best


def _build_tree(
    x: np.ndarray,
    y: np.ndarray,
    indices: np.ndarray,
    config: ClassifierConfig,
    fps: int,
    rng: np.random.Generator,
    depth: int,
) -> TreeNode:
    n_classes = len(config.classes)
    counts = np.bincount(y[indices], minlength=n_classes)

    def leaf() -> TreeNode:
        return TreeNode(class_counts=tuple(int(c) for c in counts))

    if (
        np.count_nonzero(counts) <= 1
        or indices.size < config.min_samples_split
        or (config.max_depth and depth >= config.max_depth)
    ):
        return leaf()
    features = rng.choice(x.shape[1], size=fps, replace=False)
    split = _best_split(x[indices], y[indices], features, n_classes)
    if split is None:
        return leaf()
    _, feature, threshold = split
    go_left = x[indices, feature] <= np.float32(threshold)
    left_idx = indices[go_left]
    right_idx = indices[~go_left]
    return TreeNode(
        feature_index=feature,
        threshold=threshold,
        left=_build_tree(x, y, left_idx, config, fps, rng, depth + 1),
        right=_build_tree(x, y, right_idx, config, fps, rng, depth + 1),
    )


def train_forest(x: np.ndarray, y: list[str], config: ClassifierConfig) -> Forest:
    """Train ``config.n_trees`` Gini decision trees on bootstrap samples.

    Deterministic for a fixed seed: each tree draws its bootstrap sample
    and per-node feature subsets from its own generator, spawned from
    ``config.seed``.
    """
    x = np.ascontiguousarray(np.asarray(x, dtype=np.float32))
    if x.ndim != 2:
        raise DimMismatch(f"X must be 2-D, got shape {x.shape}")
    n, dim = x.shape
    if len(y) != n:
        raise DimMismatch(f"{n} rows but {len(y)} labels")
    if n == 0 or dim == 0:
        raise DimMismatch("training set must be non-empty")
    class_index = {name: k for k, name in enumerate(config.classes)}
    try:
        y_idx = np.array([class_index[name] for name in y], dtype=np.int64)
    except KeyError as exc:
        raise ValueError(f"unknown class label {exc.args[0]!r}") from None
    fps = config.features_per_split
    if fps == 0:
        fps = max(1, math.isqrt(dim))
    if not 1 <= fps <= dim:
        raise DimMismatch(f"features_per_split {fps} not in [1, {dim}]")

    trees = []
    for seq in np.random.SeedSequence(config.seed).spawn(config.n_trees):
        rng = np.random.default_rng(seq)
        if config.bootstrap:
            indices = np.sort(rng.integers(0, n, size=n))
        else:
            indices = np.arange(n)
        trees.append(_build_tree(x, y_idx, indices, config, fps, rng, 0))
    return Forest(trees=trees, config=config, n_features=dim)


# ---------------------------------------------------------------------------
# Prediction
# ---------------------------------------------------------------------------


def _tree_class(node: TreeNode, x: np.ndarray) -> int:
    while not node.is_leaf:
        node = node.left if x[node.feature_index] <= np.float32(node.threshold) else node.right
    return _break_tie(node.class_counts)


def predict(forest: Forest, x: np.ndarray) -> tuple[str, tuple[int, ...]]:
    """Plurality vote over trees; returns ``(class_name, votes)``.

    ``votes`` counts tree votes in ``config.classes`` order.  Vote ties
    resolve Material > Process > Task.
    """
    x = np.asarray(x, dtype=np.float32).reshape(-1)
    if x.shape[0] != forest.n_features:
        raise DimMismatch(
            f"query has {x.shape[0]} features, forest expects {forest.n_features}"
        )
    votes = [0] * len(forest.config.classes)
    for tree in forest.trees:
        votes[_tree_class(tree, x)] += 1
    return forest.config.classes[_break_tie(votes)], tuple(votes)


def classify_keyphrase(span: KeyphraseSpan, token_predictions: list[str]) -> str:
    """Majority class over the span's token votes (Material > Process > Task)."""
    if not token_predictions:
        raise ValueError(f"no token predictions for span {span.id}")
    counts = [token_predictions.count(name) for name in KEYPHRASE_CLASSES]
    return KEYPHRASE_CLASSES[_break_tie(counts)]


# ---------------------------------------------------------------------------
# Serialization
# ---------------------------------------------------------------------------

_FOREST_FORMAT = "seal-forest"
_FOREST_VERSION = 1


def _flatten(tree: TreeNode, out: list[tuple[TreeNode, int, int]]) -> int:
    """Preorder-append ``(node, left_index, right_index)``; return root index."""
    pos = len(out)
    out.append((tree, -1, -1))
    if not tree.is_leaf:
        left = _flatten(tree.left, out)
        right = _flatten(tree.right, out)
        out[pos] = (tree, left, right)
    return pos


def save_forest(path: str | Path, forest: Forest) -> None:
    """Write ``manifest.json`` + ``nodes.bin`` (field-major, little-endian).

    ``nodes.bin`` holds, for all trees' nodes in preorder: feature index
    (int32, -1 for leaves), threshold (float32), left/right child as
    absolute node indices (int32, -1 for leaves), then per-node class
    counts (uint32 × n_classes).
    """
    path = Path(path)
    path.mkdir(parents=True, exist_ok=True)
    flat: list[tuple[TreeNode, int, int]] = []
    roots = [_flatten(tree, flat) for tree in forest.trees]

    n = len(flat)
    n_classes = len(forest.config.classes)
    feat = np.empty(n, dtype="<i4")
    thr = np.empty(n, dtype="<f4")
    left = np.empty(n, dtype="<i4")
    right = np.empty(n, dtype="<i4")
    counts = np.zeros((n, n_classes), dtype="<u4")
    for i, (node, li, ri) in enumerate(flat):
        feat[i] = node.feature_index
        thr[i] = node.threshold
        left[i] = li
        right[i] = ri
        if node.is_leaf:
            counts[i] = node.class_counts
    payload = (
        feat.tobytes() + thr.tobytes() + left.tobytes() + right.tobytes()
        + counts.tobytes()
    )
    manifest = {
        "format": _FOREST_FORMAT,
        "version": _FOREST_VERSION,
        "classes": list(forest.config.classes),
        "n_features": forest.n_features,
        "n_nodes": n,
        "tree_roots": roots,
        "config": {
            "n_trees": forest.config.n_trees,
            "max_depth": forest.config.max_depth,
            "min_samples_split": forest.config.min_samples_split,
            "features_per_split": forest.config.features_per_split,
            "bootstrap": forest.config.bootstrap,
            "seed": forest.config.seed,
        },
    }
    (path / "manifest.json").write_text(
        json.dumps(manifest, indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )
    (path / "nodes.bin").write_bytes(payload)


def _rebuild(
    idx: int,
    feat: np.ndarray,
    thr: np.ndarray,
    left: np.ndarray,
    right: np.ndarray,
    counts: np.ndarray,
) -> TreeNode:
    if not 0 <= idx < feat.shape[0]:
        raise CorruptForest(f"node index {idx} out of range")
    if feat[idx] < 0:
        row = tuple(int(c) for c in counts[idx])
        if not any(row):
            raise CorruptForest(f"leaf {idx} has all-zero counts")
        return TreeNode(class_counts=row)
    return TreeNode(
        feature_index=int(feat[idx]),
        threshold=float(thr[idx]),
        left=_rebuild(int(left[idx]), feat, thr, left, right, counts),
        right=_rebuild(int(right[idx]), feat, thr, left, right, counts),
    )


def load_forest(path: str | Path) -> Forest:
    """Inverse of :func:`save_forest`; raises :class:`CorruptForest`."""
    path = Path(path)
    try:
        manifest = json.loads((path / "manifest.json").read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise CorruptForest(f"cannot read manifest: {exc}") from exc
    if manifest.get("format") != _FOREST_FORMAT:
        raise CorruptForest(f"unexpected format {manifest.get('format')!r}")
    if manifest.get("version") != _FOREST_VERSION:
        raise CorruptForest(f"unsupported version {manifest.get('version')!r}")
    try:
        classes = tuple(manifest["classes"])
        n_nodes = int(manifest["n_nodes"])
        n_features = int(manifest["n_features"])
        roots = [int(r) for r in manifest["tree_roots"]]
        cfg = manifest["config"]
        config = ClassifierConfig(
            n_trees=int(cfg["n_trees"]),
            max_depth=int(cfg["max_depth"]),
            min_samples_split=int(cfg["min_samples_split"]),
            features_per_split=int(cfg["features_per_split"]),
            bootstrap=bool(cfg["bootstrap"]),
            seed=int(cfg["seed"]),
            classes=classes,
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise CorruptForest(f"malformed manifest: {exc}") from exc
    if len(roots) != config.n_trees:
        raise CorruptForest(
            f"{len(roots)} tree roots for n_trees={config.n_trees}"
        )

    blob = (path / "nodes.bin").read_bytes()
    n_classes = len(classes)
    expected = n_nodes * (4 * 4 + 4 * n_classes)
    if len(blob) != expected:
        raise CorruptForest(
            f"nodes.bin holds {len(blob)} bytes, expected {expected}"
        )
    off = 0

    def take(dtype: str, count: int) -> np.ndarray:
        nonlocal off
        arr = np.frombuffer(blob, dtype=dtype, count=count, offset=off)
        off += arr.nbytes
        return arr

    feat = take("<i4", n_nodes)
    thr = take("<f4", n_nodes)
    left = take("<i4", n_nodes)
    right = take("<i4", n_nodes)
    counts = take("<u4", n_nodes * n_classes).reshape(n_nodes, n_classes)
    try:
        trees = [_rebuild(r, feat, thr, left, right, counts) for r in roots]
    except (ValueError, RecursionError) as exc:
        raise CorruptForest(f"invalid tree structure: {exc}") from exc
    return Forest(trees=trees, config=config, n_features=n_features)
