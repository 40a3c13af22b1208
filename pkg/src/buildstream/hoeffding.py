"""Incremental Hoeffding tree for two-class streams of numeric attributes.

Each leaf keeps, per class and per attribute, a running Gaussian summary
(count, mean, M2) plus the attribute's observed range.  Every
``grace_period`` arrivals a leaf scores a fixed grid of candidate thresholds
per attribute by information gain, estimating how many instances of each
class fall left of a threshold from the Gaussian CDF.  It splits when the
best attribute beats the runner-up by more than the Hoeffding bound, or
when the bound itself has shrunk below the tie threshold.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterator, Sequence

import numpy as np
from scipy.special import ndtr

from .stream import ClassLabel

N_CLASSES = 2


def hoeffding_bound(R: float, delta: float, n: int) -> float:
    """sqrt(R^2 ln(1/delta) / (2n))."""
    if n < 1:
        raise ValueError(f"Hoeffding bound undefined for n={n}")
    if R <= 0:
        raise ValueError(f"range R must be positive, got {R}")
    if not 0 < delta <= 1:
        raise ValueError(f"delta must lie in (0, 1], got {delta}")
    return math.sqrt(R * R * math.log(1.0 / delta) / (2.0 * n))


def entropy(counts) -> np.ndarray:
    """Base-2 Shannon entropy over the last axis of a count array."""
    counts = np.asarray(counts, dtype=float)
    total = counts.sum(axis=-1, keepdims=True)
    with np.errstate(divide="ignore", invalid="ignore"):
        p = np.where(total > 0, counts / total, 0.0)
        terms = np.where(p > 0, -p * np.log2(p), 0.0)
    return terms.sum(axis=-1)


def split_gain(parent, left, right) -> np.ndarray:
    """Information gain of partitioning ``parent`` class counts into ``left`` / ``right``.

    Works elementwise over leading axes; the class axis is last.
    """
    parent = np.asarray(parent, dtype=float)
    left = np.asarray(left, dtype=float)
    right = np.asarray(right, dtype=float)
    n = parent.sum(axis=-1)
    nl = left.sum(axis=-1)
    nr = right.sum(axis=-1)
    with np.errstate(divide="ignore", invalid="ignore"):
        weighted = np.where(n > 0, (nl * entropy(left) + nr * entropy(right)) / n, 0.0)
    return np.clip(entropy(parent) - weighted, 0.0, 1.0)


@dataclass(frozen=True)
class SplitConfig:
    delta: float = 1e-7
    tau: float = 0.05
    grace_period: int = 200
    range_R: float = 1.0
    candidate_thresholds: int = 10

    def __post_init__(self) -> None:
        if not 0 < self.delta < 1:
            raise ValueError(f"delta must lie in (0, 1), got {self.delta}")
        if self.tau < 0:
            raise ValueError(f"tau must be non-negative, got {self.tau}")
        if self.grace_period < 1:
            raise ValueError(f"grace period must be >= 1, got {self.grace_period}")
        if self.candidate_thresholds < 1:
            raise ValueError("need at least one candidate threshold")
        if self.range_R <= 0:
            raise ValueError("range_R must be positive")


class LeafStats:
    """Sufficient statistics of one leaf.  Memory is O(classes x attributes)."""

    def __init__(self, n_features: int):
        self.n_features = n_features
        self.class_counts = np.zeros(N_CLASSES, dtype=np.int64)
        self.mean = np.zeros((N_CLASSES, n_features))
        self.m2 = np.zeros((N_CLASSES, n_features))
        self.lo = np.full(n_features, np.inf)
        self.hi = np.full(n_features, -np.inf)
        self.since_check = 0

    @property
    def n(self) -> int:
        return int(self.class_counts.sum())

    def update(self, x: np.ndarray, y: int) -> None:
        self.class_counts[y] += 1
        c = self.class_counts[y]
        delta = x - self.mean[y]
        self.mean[y] += delta / c
        self.m2[y] += delta * (x - self.mean[y])
        np.minimum(self.lo, x, out=self.lo)
        np.maximum(self.hi, x, out=self.hi)
        self.since_check += 1

    def std(self) -> np.ndarray:
        counts = self.class_counts[:, None]
        with np.errstate(divide="ignore", invalid="ignore"):
            var = np.where(counts > 1, self.m2 / np.maximum(counts - 1, 1), 0.0)
        return np.sqrt(np.maximum(var, 0.0))

    def is_pure(self) -> bool:
        return int(np.count_nonzero(self.class_counts)) <= 1

    def thresholds(self, n_candidates: int) -> np.ndarray:
        """Equally spaced interior points of each attribute's observed range, shape (d, m)."""
        frac = np.arange(1, n_candidates + 1) / (n_candidates + 1)
        return self.lo[:, None] + (self.hi - self.lo)[:, None] * frac[None, :]

    def left_counts(self, attribute, threshold) -> np.ndarray:
        """Estimated per-class counts with ``x[attribute] <= threshold``.

        ``attribute`` and ``threshold`` broadcast together; the class axis is
        appended last.
        """
        attribute = np.asarray(attribute)
        t = np.asarray(threshold, dtype=float)
        sd = self.std()
        out = []
        for c in range(N_CLASSES):
            nc = float(self.class_counts[c])
            mu = self.mean[c][attribute]
            s = sd[c][attribute]
            with np.errstate(divide="ignore", invalid="ignore"):
                frac = np.where(s > 0, ndtr((t - mu) / np.where(s > 0, s, 1.0)), (mu <= t).astype(float))
            # outside the observed range the mass is all on one side
            frac = np.where(t < self.lo[attribute], 0.0, frac)
            frac = np.where(t >= self.hi[attribute], 1.0, frac)
            out.append(nc * frac if nc else np.zeros(np.broadcast(mu, t).shape))
        return np.stack(out, axis=-1)

    def gains(self, attribute, threshold) -> np.ndarray:
        left = self.left_counts(attribute, threshold)
        right = np.clip(self.class_counts - left, 0.0, None)
        return split_gain(np.broadcast_to(self.class_counts, left.shape), left, right)


def info_gain(stats: LeafStats, attribute: int, threshold: float) -> float:
    """Estimated gain of the binary test ``x[attribute] <= threshold``, in [0, 1]."""
    if stats.n < 2:
        raise ValueError("information gain needs at least two observations")
    if stats.lo[attribute] >= stats.hi[attribute]:
        return 0.0
    return float(stats.gains(attribute, threshold))


@dataclass(frozen=True)
class SplitDecision:
    attribute: int | None = None
    threshold: float | None = None
    best_gain: float = 0.0
    runner_up_gain: float = 0.0
    epsilon: float = math.inf

    @property
    def should_split(self) -> bool:
        return self.attribute is not None


NO_SPLIT = SplitDecision()


def best_candidates(stats: LeafStats, n_candidates: int) -> tuple[np.ndarray, np.ndarray]:
    """Best gain and its threshold for every attribute.

    Attributes with an empty observed range score 0.  Among equal gains the
    lowest threshold wins.
    """
    d = stats.n_features
    T = stats.thresholds(n_candidates)
    G = stats.gains(np.arange(d)[:, None], T)
    G[~(stats.hi > stats.lo)] = 0.0
    idx = np.argmax(G, axis=1)
    rows = np.arange(d)
    return G[rows, idx], T[rows, idx]


def split_rule(best_gain: float, runner_up_gain: float, epsilon: float, tau: float) -> bool:
    """Hoeffding split test with tie breaking."""
    if best_gain <= 0.0:
        return False
    return best_gain - runner_up_gain > epsilon or epsilon < tau


def attempt_split(stats: LeafStats, config: SplitConfig) -> SplitDecision:
    """Decide whether a leaf should split, and on what.

    Splits on the top attribute when its gain lead over the runner-up
    exceeds the Hoeffding bound, or when the bound is already below the tie
    threshold.  Pure leaves and leaves where nothing has positive gain never
    split.
    """
    n = stats.n
    if n < 1 or stats.is_pure():
        return NO_SPLIT
    gains, thresholds = best_candidates(stats, config.candidate_thresholds)
    order = np.argsort(-gains, kind="stable")
    best = int(order[0])
    g_best = float(gains[best])
    g_second = float(gains[order[1]]) if len(order) > 1 else 0.0
    eps = hoeffding_bound(config.range_R, config.delta, n)
    if split_rule(g_best, g_second, eps, config.tau):
        return SplitDecision(best, float(thresholds[best]), g_best, g_second, eps)
    return SplitDecision(None, None, g_best, g_second, eps)


class Leaf:
    __slots__ = ("stats",)

    def __init__(self, n_features: int):
        self.stats = LeafStats(n_features)


class Branch:
    __slots__ = ("attribute", "threshold", "left", "right")

    def __init__(self, attribute: int, threshold: float, left, right):
        self.attribute = attribute
        self.threshold = threshold
        self.left = left
        self.right = right

    def child(self, x) -> Leaf | Branch:
        return self.left if x[self.attribute] <= self.threshold else self.right


@dataclass
class SplitEvent:
    attribute: int
    threshold: float
    n: int
    depth: int
    decision: SplitDecision


@dataclass
class TreeStats:
    depth: int
    leaves: int
    internal_nodes: int
    instances_learned: int = 0

    def as_dict(self) -> dict:
        return {
            "depth": self.depth,
            "leaves": self.leaves,
            "internal_nodes": self.internal_nodes,
            "instances_learned": self.instances_learned,
        }


class HoeffdingTree:
    """Binary Hoeffding tree over numeric attributes.

    Parameters
    ----------
    n_features : int
        Length of every feature vector.
    config : SplitConfig, optional
        Split confidence, tie threshold, grace period and threshold grid.
    feature_names : sequence of str, optional
        Used for DOT labels; defaults to ``x0, x1, ...``.

    Notes
    -----
    ``learn_one`` mutates the tree and must not run concurrently with any
    other call.  ``predict_one`` on an idle tree is read-only.
    """

    def __init__(self, n_features: int, config: SplitConfig | None = None, feature_names: Sequence[str] | None = None):
        self.n_features = n_features
        self.config = config or SplitConfig()
        if feature_names is None:
            feature_names = [f"x{i}" for i in range(n_features)]
        if len(feature_names) != n_features:
            raise ValueError("feature_names length differs from n_features")
        self.feature_names = tuple(feature_names)
        self.reset()

    def reset(self) -> None:
        self.root: Leaf | Branch = Leaf(self.n_features)
        self.instances_learned = 0
        self.split_checks = 0
        self.split_events: list[SplitEvent] = []

    def _route(self, x) -> tuple[Leaf, int]:
        node = self.root
        depth = 0
        while isinstance(node, Branch):
            node = node.child(x)
            depth += 1
        return node, depth

    def learn_one(self, x, y: ClassLabel) -> SplitEvent | None:
        x = np.asarray(x, dtype=float)
        if x.shape != (self.n_features,):
            raise ValueError(f"expected {self.n_features} features, got shape {x.shape}")
        leaf, depth = self._route(x)
        leaf.stats.update(x, int(y))
        self.instances_learned += 1
        if leaf.stats.since_check < self.config.grace_period:
            return None
        leaf.stats.since_check = 0
        self.split_checks += 1
        decision = attempt_split(leaf.stats, self.config)
        if not decision.should_split:
            return None
        self._replace(leaf, Branch(decision.attribute, decision.threshold, Leaf(self.n_features), Leaf(self.n_features)))
        event = SplitEvent(decision.attribute, decision.threshold, leaf.stats.n, depth, decision)
        self.split_events.append(event)
        return event

    def _replace(self, leaf: Leaf, branch: Branch) -> None:
        if self.root is leaf:
            self.root = branch
            return
        for node in self._nodes():
            if isinstance(node, Branch):
                if node.left is leaf:
                    node.left = branch
                    return
                if node.right is leaf:
                    node.right = branch
                    return
        raise RuntimeError("leaf not found in tree")

    def predict_proba_one(self, x) -> np.ndarray:
        """Laplace-smoothed leaf frequencies indexed by ClassLabel value."""
        leaf, _ = self._route(x)
        counts = leaf.stats.class_counts
        return (counts + 1.0) / (counts.sum() + N_CLASSES)

    def predict_one(self, x) -> tuple[ClassLabel, np.ndarray]:
        scores = self.predict_proba_one(x)
        label = ClassLabel.SUCCESS if scores[ClassLabel.SUCCESS] >= scores[ClassLabel.FAILURE] else ClassLabel.FAILURE
        return label, scores

    def _nodes(self) -> Iterator[Leaf | Branch]:
        stack = [self.root]
        while stack:
            node = stack.pop()
            yield node
            if isinstance(node, Branch):
                stack.extend((node.right, node.left))

    def leaves(self) -> list[Leaf]:
        return [n for n in self._nodes() if isinstance(n, Leaf)]

    def depth(self) -> int:
        best = 0
        stack = [(self.root, 0)]
        while stack:
            node, d = stack.pop()
            if isinstance(node, Branch):
                stack.extend(((node.left, d + 1), (node.right, d + 1)))
            else:
                best = max(best, d)
        return best

    def stats(self) -> TreeStats:
        leaves = internal = 0
        for node in self._nodes():
            if isinstance(node, Branch):
                internal += 1
            else:
                leaves += 1
        return TreeStats(self.depth(), leaves, internal, self.instances_learned)


def _dot_escape(text: str) -> str:
    return text.replace("\\", "\\\\").replace('"', '\\"')


def export_dot(model: HoeffdingTree, *, name: str = "hoeffding_tree") -> tuple[str, TreeStats]:
    """Render the tree as a Graphviz digraph.

    Internal nodes read ``attribute ≤ threshold``; the left edge is the
    ``yes`` branch.  Leaves show the majority class and the class counts.
    """
    lines = [f"digraph {name} {{", '  node [fontname="Helvetica"];']
    ids: dict[int, int] = {}

    def node_id(node) -> int:
        return ids.setdefault(id(node), len(ids))

    stack = [model.root]
    while stack:
        node = stack.pop()
        nid = node_id(node)
        if isinstance(node, Branch):
            label = f"{model.feature_names[node.attribute]} ≤ {node.threshold:.6g}"
            lines.append(f'  n{nid} [shape=box, label="{_dot_escape(label)}"];')
            left, right = node_id(node.left), node_id(node.right)
            lines.append(f'  n{nid} -> n{left} [label="yes"];')
            lines.append(f'  n{nid} -> n{right} [label="no"];')
            stack.extend((node.right, node.left))
        else:
            counts = node.stats.class_counts
            label = ClassLabel.SUCCESS if counts[1] >= counts[0] else ClassLabel.FAILURE
            text = f"{label.token}\\nsuccess={int(counts[1])} failure={int(counts[0])}"
            lines.append(f'  n{nid} [shape=ellipse, label="{text}"];')
    lines.append("}")
    return "\n".join(lines) + "\n", model.stats()
