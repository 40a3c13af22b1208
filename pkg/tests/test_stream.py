from __future__ import annotations

import io
from datetime import datetime, timedelta

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from buildstream.stream import (
    DEFAULT_SCHEMA,
    METRIC_COLUMNS,
    ClassLabel,
    Instance,
    LabeledStream,
    Provenance,
    RowError,
    SchemaError,
    StreamSchema,
    parse_stream,
    serialize_stream,
    sort_by_date,
)

from conftest import make_stream, small_schema

SCHEMA3 = small_schema(3)
HEADER3 = "build_id,date,m0,m1,m2,outcome\n"


def test_canonical_schema_has_38_metrics_by_group():
    assert len(METRIC_COLUMNS) == 38
    assert len(set(METRIC_COLUMNS)) == 38
    assert DEFAULT_SCHEMA.n_features == 38
    assert "interfaces" in METRIC_COLUMNS and "lcom3" in METRIC_COLUMNS


def test_schema_rejects_duplicate_columns():
    with pytest.raises(SchemaError):
        StreamSchema(metric_columns=("a", "b", "a"))
    with pytest.raises(SchemaError):
        StreamSchema(metric_columns=("a", "date"))


def test_parse_two_rows():
    text = HEADER3 + "b1,2010-01-01T00:00:00,1,2,3,success\nb2,2010-01-02T00:00:00,4,5.5,-6,FAILURE\n"
    stream = parse_stream(text.encode(), SCHEMA3)
    assert len(stream) == 2
    assert stream.class_counts() == (1, 1)
    assert stream[1].features == (4.0, 5.5, -6.0)
    assert stream[1].outcome is ClassLabel.FAILURE
    assert stream[0].date == datetime(2010, 1, 1)


def test_any_column_order_and_optional_id():
    text = "outcome,m2,date,m0,m1\nsuccess,3,2010-01-01T00:00:00,1,2\n"
    stream = parse_stream(text, SCHEMA3)
    assert stream[0].features == (1.0, 2.0, 3.0)
    assert stream[0].id == "1"


def test_binary_file_object_and_quoted_cells():
    text = HEADER3 + '"b,1",2010-01-01T00:00:00,"1",2,3,success\n'
    stream = parse_stream(io.BytesIO(text.encode()), SCHEMA3)
    assert stream[0].id == "b,1"


def test_unknown_outcome_reports_row():
    text = HEADER3 + "b1,2010-01-01T00:00:00,1,2,3,success\nb2,2010-01-02T00:00:00,1,2,3,maybe\n"
    with pytest.raises(RowError) as err:
        parse_stream(text, SCHEMA3)
    assert err.value.row == 2


@pytest.mark.parametrize(
    "row, fragment",
    [
        ("b1,2010-01-01T00:00:00,x,2,3,success", "non-numeric"),
        ("b1,2010-01-01T00:00:00,,2,3,success", "missing"),
        ("b1,2010-01-01T00:00:00,nan,2,3,success", "non-finite"),
        ("b1,2010-01-01,1,2,3,success", "bad date"),
        ("b1,2010-01-01T00:00:00,1,2,success", "expected 6 cells"),
    ],
)
def test_row_errors(row, fragment):
    with pytest.raises(RowError, match=fragment) as err:
        parse_stream(HEADER3 + row + "\n", SCHEMA3)
    assert err.value.row == 1


def test_missing_and_unknown_columns_are_named():
    with pytest.raises(SchemaError) as err:
        parse_stream("date,m0,m1,outcome\n", SCHEMA3)
    assert err.value.column == "m2"
    with pytest.raises(SchemaError) as err:
        parse_stream("date,m0,m1,m2,outcome,extra\n", SCHEMA3)
    assert err.value.column == "extra"


def test_paper_class_counts_from_199_rows():
    rows = [HEADER3]
    for i in range(199):
        outcome = "success" if i < 127 else "failure"
        rows.append(f"b{i},2010-01-01T00:00:00,{i},0,0,{outcome}\n")
    stream = parse_stream("".join(rows), SCHEMA3)
    assert stream.class_counts() == (127, 72)
    assert [inst.id for inst in stream][:3] == ["b0", "b1", "b2"]


def test_instance_rejects_non_finite_and_tz():
    with pytest.raises(ValueError):
        Instance("a", datetime(2010, 1, 1), (1.0, float("inf")), ClassLabel.SUCCESS)
    from datetime import timezone

    with pytest.raises(ValueError):
        Instance("a", datetime(2010, 1, 1, tzinfo=timezone.utc), (1.0,), ClassLabel.SUCCESS)


def test_stream_rejects_wrong_feature_length():
    with pytest.raises(ValueError):
        LabeledStream([Instance("a", datetime(2010, 1, 1), (1.0,), ClassLabel.SUCCESS)], SCHEMA3)


def test_sort_by_date_cases():
    d0 = datetime(2010, 1, 1)
    dates = [d0 + timedelta(days=2), d0 + timedelta(days=1), d0]
    rev = make_stream([[0.0], [1.0], [2.0]], [1, 0, 1], dates=dates)
    out = sort_by_date(rev)
    assert [i.date for i in out] == sorted(dates)
    assert sort_by_date(out) == out

    tied = make_stream([[0.0], [1.0], [2.0]], [1, 0, 1], dates=[d0 + timedelta(days=1), d0, d0])
    out = sort_by_date(tied)
    assert [i.id for i in out] == ["i1", "i2", "i0"]


def test_provenance_round_trip():
    base = make_stream([[1.0, 2.0, 3.0], [4.0, 5.0, 6.0]], [1, 1], SCHEMA3)
    syn = Instance("s0", base[0].date, (2.0, 3.0, 4.0), ClassLabel.SUCCESS, Provenance.synthetic("i0", "i1"))
    stream = LabeledStream(base.instances + (syn,), SCHEMA3)
    text = serialize_stream(stream)
    assert "provenance,parents" in text.splitlines()[0]
    again = parse_stream(text, SCHEMA3)
    assert again == stream
    assert again[2].provenance == Provenance("synthetic", "i0", "i1")


finite = st.floats(allow_nan=False, allow_infinity=False, width=64)


@settings(max_examples=60, deadline=None)
@given(
    rows=st.lists(
        st.tuples(st.lists(finite, min_size=3, max_size=3), st.integers(0, 1), st.integers(0, 10**8)),
        min_size=1,
        max_size=25,
    )
)
def test_parse_serialize_parse_is_identity(rows):
    d0 = datetime(2001, 1, 1)
    X = [r[0] for r in rows]
    y = [r[1] for r in rows]
    dates = [d0 + timedelta(seconds=r[2]) for r in rows]
    stream = make_stream(X, y, SCHEMA3, dates)
    once = parse_stream(serialize_stream(stream), SCHEMA3)
    twice = parse_stream(serialize_stream(once), SCHEMA3)
    assert once == stream == twice
    np.testing.assert_allclose(twice.feature_matrix(), stream.feature_matrix(), rtol=1e-12, atol=0)


@settings(max_examples=60, deadline=None)
@given(
    stamps=st.lists(st.integers(0, 20), min_size=0, max_size=40),
    labels=st.lists(st.integers(0, 1), min_size=40, max_size=40),
)
def test_sort_is_idempotent_permutation(stamps, labels):
    d0 = datetime(2001, 1, 1)
    dates = [d0 + timedelta(minutes=s) for s in stamps]
    stream = make_stream([[float(i)] for i in range(len(stamps))], labels[: len(stamps)], dates=dates)
    once = sort_by_date(stream)
    assert sort_by_date(once) == once
    assert sorted(i.id for i in once) == sorted(i.id for i in stream)
    assert once.class_counts() == stream.class_counts()
    assert sum(once.class_counts()) == len(once)
    keys = [(i.date, int(i.id[1:])) for i in once]
    assert keys == sorted(keys)
