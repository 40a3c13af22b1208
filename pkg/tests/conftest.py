from __future__ import annotations

from datetime import datetime, timedelta

import numpy as np
import pytest

from buildstream.stream import ClassLabel, Instance, LabeledStream, StreamSchema

BASE_DATE = datetime(2010, 5, 1, 9, 30, 0)


def small_schema(n: int) -> StreamSchema:
    return StreamSchema(metric_columns=tuple(f"m{i}" for i in range(n)))


def make_stream(X, y, schema: StreamSchema | None = None, dates=None) -> LabeledStream:
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    schema = schema or small_schema(X.shape[1])
    if dates is None:
        dates = [BASE_DATE + timedelta(hours=i) for i in range(len(X))]
    rows, labels = X.tolist(), np.asarray(y, dtype=int).tolist()
    return LabeledStream(
        [Instance(f"i{i}", dates[i], rows[i], ClassLabel(labels[i])) for i in range(len(X))],
        schema,
    )


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)
