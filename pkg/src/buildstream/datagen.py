"""Synthetic build-metric streams with exact class counts.

Features are drawn from class-conditional Gaussians.  On the informative
columns the success mean sits ``overlap`` standard deviations from the
failure mean; the remaining columns are pure noise.  Each column is then
mapped to its own offset and scale so columns differ in magnitude the way
raw software metrics do.  Nothing here models real metric distributions.
"""

from __future__ import annotations

from dataclasses import dataclass
from datetime import datetime, timedelta

import numpy as np

from .stream import DEFAULT_SCHEMA, ClassLabel, Instance, LabeledStream, StreamSchema


@dataclass(frozen=True)
class GenSpec:
    n_instances: int = 199
    success_count: int = 127
    failure_count: int = 72
    overlap: float = 1.0
    n_informative: int = 5
    informative: tuple[int, ...] | None = None
    shift_point: int | None = None
    post_shift_success_prob: float | None = None
    seed: int = 0
    start: datetime = datetime(2008, 1, 1)
    step_seconds: int = 86400

    def __post_init__(self) -> None:
        if self.success_count + self.failure_count != self.n_instances:
            raise ValueError(
                f"success_count + failure_count = {self.success_count + self.failure_count}, "
                f"n_instances = {self.n_instances}"
            )
        if self.success_count < 0 or self.failure_count < 0:
            raise ValueError("class counts must be non-negative")
        if self.overlap <= 0:
            raise ValueError("overlap must be positive")
        if self.step_seconds < 0:
            raise ValueError("step_seconds must be non-negative")
        if self.shift_point is not None:
            if not 0 <= self.shift_point <= self.n_instances:
                raise ValueError("shift_point outside the stream")
            if self.post_shift_success_prob is None or not 0 <= self.post_shift_success_prob <= 1:
                raise ValueError("a shift needs post_shift_success_prob in [0, 1]")

    @classmethod
    def scaled(cls, n_instances: int, **kwargs) -> GenSpec:
        """A spec of ``n_instances`` keeping the default 127:72 class ratio."""
        success = round(n_instances * 127 / 199)
        return cls(n_instances=n_instances, success_count=success, failure_count=n_instances - success, **kwargs)

    def informative_columns(self, n_features: int) -> tuple[int, ...]:
        if self.informative is not None:
            cols = tuple(self.informative)
        else:
            cols = tuple(range(min(self.n_informative, n_features)))
        if any(not 0 <= c < n_features for c in cols):
            raise ValueError(f"informative column out of range for {n_features} features")
        return cols


def _label_sequence(spec: GenSpec, rng: np.random.Generator) -> np.ndarray:
    n, s = spec.n_instances, spec.success_count
    if spec.shift_point is None:
        labels = np.array([1] * s + [0] * (n - s))
        return rng.permutation(labels)
    pre, post = spec.shift_point, n - spec.shift_point
    post_success = round(spec.post_shift_success_prob * post)
    post_success = min(max(post_success, s - pre, 0), post, s)
    pre_success = s - post_success
    first = rng.permutation(np.array([1] * pre_success + [0] * (pre - pre_success)))
    second = rng.permutation(np.array([1] * post_success + [0] * (post - post_success)))
    return np.concatenate((first, second)).astype(int)


def generate_stream(spec: GenSpec | None = None, schema: StreamSchema = DEFAULT_SCHEMA) -> LabeledStream:
    spec = spec or GenSpec()
    rng = np.random.default_rng(spec.seed)
    d = schema.n_features
    labels = _label_sequence(spec, rng)

    z = rng.standard_normal((spec.n_instances, d))
    cols = list(spec.informative_columns(d))
    z[:, cols] += spec.overlap * labels[:, None]

    offset = rng.uniform(0.0, 100.0, size=d)
    scale = 10.0 ** rng.uniform(-2.0, 3.0, size=d)
    X = offset + scale * z

    step = timedelta(seconds=spec.step_seconds)
    instances = [
        Instance(f"b{i:05d}", spec.start + i * step, tuple(X[i].tolist()), ClassLabel(int(labels[i])))
        for i in range(spec.n_instances)
    ]
    return LabeledStream(instances, schema)
