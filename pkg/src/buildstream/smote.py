"""SMOTE oversampling of one class, and the two-pass ratio-preserving protocol.

Neighbours are searched among instances of the seed's own class, by
Euclidean distance on min-max scaled features (scaled per class, over the
pool).  New points are interpolated in the raw feature space, so they always
lie on the segment between the seed and the chosen neighbour.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .stream import ClassLabel, Instance, LabeledStream, Provenance, sort_by_date

RNG_ALGORITHM = "numpy.PCG64 via SeedSequence.spawn"
NORMALIZATIONS = ("minmax", "none")

# Rows per block in the pairwise-distance search; bounds peak memory.
_BLOCK = 32


class SmoteError(ValueError):
    pass


@dataclass(frozen=True)
class SmoteConfig:
    k: int = 5
    percent: int = 900
    seed: int = 0
    distance_normalization: str = "minmax"

    def __post_init__(self) -> None:
        if self.k < 1:
            raise SmoteError(f"k must be >= 1, got {self.k}")
        if self.percent < 0 or self.percent % 100:
            raise SmoteError(f"percent must be a non-negative multiple of 100, got {self.percent}")
        if self.distance_normalization not in NORMALIZATIONS:
            raise SmoteError(f"unknown normalization {self.distance_normalization!r}")
        if not 0 <= self.seed < 2**64:
            raise SmoteError("seed must fit in 64 bits")


@dataclass
class SyntheticBatch:
    """Synthetic instances plus the interpolation factor used for each."""

    instances: list[Instance] = field(default_factory=list)
    multipliers: list[float] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.instances)


def make_rngs(seed: int, n: int = 2) -> list[np.random.Generator]:
    return [np.random.Generator(np.random.PCG64(s)) for s in np.random.SeedSequence(seed).spawn(n)]


def _scale(X: np.ndarray, normalization: str) -> np.ndarray:
    if normalization == "none":
        return X
    lo = X.min(axis=0)
    span = X.max(axis=0) - lo
    # constant columns contribute nothing to the distance
    span[span == 0] = 1.0
    return (X - lo) / span


def _neighbor_table(X: np.ndarray, k: int) -> np.ndarray:
    """Row i holds the k nearest other rows of X; ties go to the lower row index."""
    m = len(X)
    out = np.empty((m, k), dtype=np.intp)
    for start in range(0, m, _BLOCK):
        block = X[start:start + _BLOCK]
        d = ((block[:, None, :] - X[None, :, :]) ** 2).sum(axis=2)
        rows = np.arange(len(block))
        d[rows, start + rows] = np.inf
        out[start:start + len(block)] = np.argsort(d, axis=1, kind="stable")[:, :k]
    return out


def _class_positions(pool: LabeledStream, label: ClassLabel) -> np.ndarray:
    return np.flatnonzero(pool.labels() == int(label))


def _check_available(label: ClassLabel, available: int, k: int) -> None:
    if available < k:
        raise SmoteError(
            f"class {label.token} has {available} candidate neighbours, k={k} required"
        )


def k_nearest_same_class(
    target: Instance, pool: LabeledStream, k: int, normalization: str = "minmax"
) -> list[Instance]:
    """Return the ``k`` closest pool members sharing ``target``'s class.

    ``target`` itself (the same object, if it is in the pool) is skipped; an
    equal-valued duplicate is not.
    """
    if normalization not in NORMALIZATIONS:
        raise SmoteError(f"unknown normalization {normalization!r}")
    positions = _class_positions(pool, target.outcome)
    candidates = [int(p) for p in positions if pool[int(p)] is not target]
    _check_available(target.outcome, len(candidates), k)

    X = pool.feature_matrix()[positions]
    t = np.asarray(target.features, dtype=float)
    if normalization == "minmax":
        lo = np.minimum(X.min(axis=0), t)
        span = np.maximum(X.max(axis=0), t) - lo
        span[span == 0] = 1.0
        cand = (pool.feature_matrix()[candidates] - lo) / span
        t = (t - lo) / span
    else:
        cand = pool.feature_matrix()[candidates]
    d = ((cand - t) ** 2).sum(axis=1)
    order = np.argsort(d, kind="stable")[:k]
    return [pool[candidates[i]] for i in order]


def synthesize(seed: Instance, neighbor: Instance, r: float, new_id: str | None = None) -> Instance:
    """Interpolate ``seed + r * (neighbor - seed)`` in raw feature space."""
    if seed.outcome != neighbor.outcome:
        raise SmoteError(
            f"seed {seed.id} ({seed.outcome.token}) and neighbour {neighbor.id} "
            f"({neighbor.outcome.token}) belong to different classes"
        )
    if not 0.0 <= r <= 1.0:
        raise SmoteError(f"interpolation factor must lie in [0, 1], got {r}")
    a = np.asarray(seed.features, dtype=float)
    b = np.asarray(neighbor.features, dtype=float)
    values = _interpolate(a, b, r)
    return Instance(
        new_id if new_id is not None else f"{seed.id}~{neighbor.id}",
        seed.date,
        tuple(values.tolist()),
        seed.outcome,
        Provenance.synthetic(seed.id, neighbor.id),
    )


def _interpolate(a: np.ndarray, b: np.ndarray, r: float) -> np.ndarray:
    # rounding in a + r*(b - a) can step past b; clip back onto the segment
    return np.clip(a + r * (b - a), np.minimum(a, b), np.maximum(a, b))


def smote_batch(
    stream: LabeledStream,
    minority_class: ClassLabel,
    config: SmoteConfig,
    rng: np.random.Generator,
    tag: str = "s",
) -> SyntheticBatch:
    """Generate ``percent / 100`` synthetic instances per member of ``minority_class``."""
    batch = SyntheticBatch()
    per_seed = config.percent // 100
    if per_seed == 0:
        return batch
    minority_class = ClassLabel(minority_class)
    positions = _class_positions(stream, minority_class)
    needed = max(2, config.k + 1)
    if len(positions) < needed:
        raise SmoteError(
            f"class {minority_class.token} has {len(positions)} instances, "
            f"SMOTE with k={config.k} needs at least {needed}"
        )
    X = stream.feature_matrix()[positions]
    table = _neighbor_table(_scale(X, config.distance_normalization), config.k)

    picks = rng.integers(0, config.k, size=(len(positions), per_seed))
    factors = rng.random((len(positions), per_seed))
    neighbors = np.take_along_axis(table, picks, axis=1)
    values = _interpolate(X[:, None, :], X[neighbors], factors[:, :, None])
    seeds = [stream[int(pos)] for pos in positions]
    rows, nbrs = values.tolist(), neighbors.tolist()
    for i, seed in enumerate(seeds):
        for j in range(per_seed):
            batch.instances.append(
                Instance._trusted(
                    f"{seed.id}.{tag}{j}",
                    seed.date,
                    tuple(rows[i][j]),
                    seed.outcome,
                    Provenance.synthetic(seed.id, seeds[nbrs[i][j]].id),
                )
            )
    batch.multipliers.extend(factors.ravel().tolist())
    return batch


def smote_pass(
    stream: LabeledStream,
    minority_class: ClassLabel,
    config: SmoteConfig,
    rng: np.random.Generator,
    tag: str = "s",
) -> LabeledStream:
    """Originals followed by the synthetic batch (not re-sorted)."""
    batch = smote_batch(stream, minority_class, config, rng, tag)
    if not batch.instances:
        return stream
    return LabeledStream(stream.instances + tuple(batch.instances), stream.schema)


def minority_of(stream: LabeledStream) -> ClassLabel:
    """The less frequent class; failure on a tie."""
    success, failure = stream.class_counts()
    return ClassLabel.SUCCESS if success < failure else ClassLabel.FAILURE


def double_smote(stream: LabeledStream, percent: int, config: SmoteConfig | None = None) -> LabeledStream:
    """Oversample the minority class, then whichever class is the minority after that.

    With both passes at the same percentage each class grows by the same
    factor, so the original class ratio survives.  The result is put back in
    date order; synthetic instances carry their seed's date.
    """
    config = config or SmoteConfig()
    if config.percent != percent:
        config = SmoteConfig(config.k, percent, config.seed, config.distance_normalization)
    if percent == 0:
        return stream
    success, failure = stream.class_counts()
    if not success or not failure:
        raise SmoteError(f"both classes must be present, got success={success} failure={failure}")
    first, second = make_rngs(config.seed)
    out = smote_pass(stream, minority_of(stream), config, first, tag="a")
    out = smote_pass(out, minority_of(out), config, second, tag="b")
    return sort_by_date(out)
