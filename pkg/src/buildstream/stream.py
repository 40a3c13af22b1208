"""Build instances, the metric schema and CSV ingestion.

A stream is read from a UTF-8 CSV whose header names the schema columns in
any order.  Dates use the ``YYYY-MM-DDTHH:MM:SS`` form and outcome tokens are
``success`` / ``failure`` (case-insensitive).
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from datetime import datetime
from enum import IntEnum
from operator import attrgetter
from typing import IO, Iterable, Iterator, Mapping, Sequence

import numpy as np

DATE_FORMAT = "%Y-%m-%dT%H:%M:%S"

BASIC_METRICS = (
    "types_per_package",
    "comments",
    "lines_of_code",
    "comment_code_ratio",
    "import_statements",
    "interfaces",
    "methods",
    "parameters",
    "lines",
    "avg_attributes_per_class",
    "avg_constructors_per_class",
    "avg_comments",
    "avg_loc_per_method",
    "avg_methods",
    "avg_parameters",
)
DEPENDENCY_METRICS = (
    "abstractness",
    "afferent_coupling",
    "efferent_coupling",
    "maintainability_index",
    "instability",
    "normalized_distance",
)
COMPLEXITY_METRICS = ("avg_block_depth", "avg_cyclomatic_complexity")
COHESION_METRICS = ("lcom1", "lcom2", "lcom3")
HALSTEAD_METRICS = (
    "operands",
    "operators",
    "unique_operands",
    "unique_operators",
    "program_volume",
    "difficulty_level",
    "effort_to_implement",
    "delivered_bugs",
    "time_to_implement",
    "program_length",
    "program_level",
    "vocabulary_size",
)

METRIC_COLUMNS = (
    BASIC_METRICS + DEPENDENCY_METRICS + COMPLEXITY_METRICS + COHESION_METRICS + HALSTEAD_METRICS
)

# Human-readable names in the same order as METRIC_COLUMNS.
METRIC_LABELS = (
    "Number of Types Per Package",
    "Number of Comments",
    "Lines of Code",
    "Comment/Code Ratio",
    "Number of Import Statements",
    "Number of Interfaces",
    "Number of Methods",
    "Number of Parameters",
    "Number of Lines",
    "Average Number of Attributes Per Class",
    "Average Number of Constructors Per Class",
    "Average Number of Comments",
    "Average Lines of Code Per Method",
    "Average Number of Methods",
    "Average Number of Parameters",
    "Abstractness",
    "Afferent Coupling",
    "Efferent Coupling",
    "Maintainability Index",
    "Instability",
    "Normalized Distance",
    "Average Block Depth",
    "Average Cyclomatic Complexity",
    "Lack of Cohesion 1",
    "Lack of Cohesion 2",
    "Lack of Cohesion 3",
    "Number of Operands",
    "Number of Operators",
    "Number of Unique Operands",
    "Number of Unique Operators",
    "Program Volume",
    "Difficulty Level",
    "Effort to Implement",
    "Number of Delivered Bugs",
    "Time to Implement",
    "Program Length",
    "Program Level",
    "Program Vocabulary Size",
)

PROVENANCE_COLUMN = "provenance"
PARENTS_COLUMN = "parents"


class StreamError(ValueError):
    """Base class for ingestion failures."""


class SchemaError(StreamError):
    """The header or schema definition is inconsistent."""

    def __init__(self, message: str, column: str | None = None) -> None:
        super().__init__(message)
        self.column = column


class RowError(StreamError):
    """A data row could not be decoded.  ``row`` is the 1-based data row number."""

    def __init__(self, row: int, message: str) -> None:
        super().__init__(f"row {row}: {message}")
        self.row = row


class ClassLabel(IntEnum):
    FAILURE = 0
    SUCCESS = 1

    @property
    def token(self) -> str:
        return self.name.lower()


@dataclass(frozen=True)
class Provenance:
    """Where an instance came from; synthetic ones record both parents."""

    kind: str = "original"
    seed_id: str | None = None
    neighbor_id: str | None = None

    def __post_init__(self) -> None:
        if self.kind not in ("original", "synthetic"):
            raise ValueError(f"unknown provenance kind {self.kind!r}")
        if self.kind == "synthetic" and (self.seed_id is None or self.neighbor_id is None):
            raise ValueError("synthetic provenance needs seed and neighbor ids")

    @property
    def is_synthetic(self) -> bool:
        return self.kind == "synthetic"

    @classmethod
    def synthetic(cls, seed_id: str, neighbor_id: str) -> Provenance:
        return cls("synthetic", seed_id, neighbor_id)


ORIGINAL = Provenance()


@dataclass(frozen=True)
class StreamSchema:
    metric_columns: tuple[str, ...] = METRIC_COLUMNS
    date_column: str = "date"
    outcome_column: str = "outcome"
    id_column: str = "build_id"
    outcome_encoding: Mapping[str, int] = field(
        default_factory=lambda: {"success": ClassLabel.SUCCESS, "failure": ClassLabel.FAILURE}
    )

    def __post_init__(self) -> None:
        names = list(self.metric_columns) + [self.date_column, self.outcome_column, self.id_column]
        seen: set[str] = set()
        for name in names:
            if name in seen:
                raise SchemaError(f"duplicate column name {name!r}", name)
            seen.add(name)
        if not self.metric_columns:
            raise SchemaError("schema needs at least one metric column")
        if sorted(int(v) for v in self.outcome_encoding.values()) != [0, 1]:
            raise SchemaError("outcome encoding must map onto {0, 1}")

    @property
    def n_features(self) -> int:
        return len(self.metric_columns)

    def decode_outcome(self, token: str) -> ClassLabel:
        for key, value in self.outcome_encoding.items():
            if key.lower() == token.strip().lower():
                return ClassLabel(int(value))
        raise KeyError(token)

    def encode_outcome(self, label: ClassLabel) -> str:
        for key, value in self.outcome_encoding.items():
            if int(value) == int(label):
                return key
        raise KeyError(label)


DEFAULT_SCHEMA = StreamSchema()


@dataclass(frozen=True)
class Instance:
    """One build: metric vector, timestamp and outcome."""

    id: str
    date: datetime
    features: tuple[float, ...]
    outcome: ClassLabel
    provenance: Provenance = ORIGINAL

    def __post_init__(self) -> None:
        object.__setattr__(self, "features", tuple(map(float, self.features)))
        if type(self.outcome) is not ClassLabel:
            object.__setattr__(self, "outcome", ClassLabel(self.outcome))
        if not all(map(math.isfinite, self.features)):
            raise ValueError(f"instance {self.id}: non-finite feature value")
        if self.date.tzinfo is not None:
            raise ValueError(f"instance {self.id}: dates must be timezone-naive")

    @classmethod
    def _trusted(cls, id, date, features, outcome, provenance):
        # skips validation; callers pass python floats derived from validated instances
        obj = object.__new__(cls)
        obj.__dict__.update(id=id, date=date, features=features, outcome=outcome, provenance=provenance)
        return obj


class LabeledStream(Sequence[Instance]):
    """An immutable, ordered sequence of instances sharing one schema."""

    def __init__(self, instances: Iterable[Instance], schema: StreamSchema = DEFAULT_SCHEMA):
        self._instances = tuple(instances)
        self.schema = schema
        n_success = 0
        width = schema.n_features
        for i, inst in enumerate(self._instances):
            if len(inst.features) != width:
                raise ValueError(
                    f"instance {i} has {len(inst.features)} features, schema has {schema.n_features}"
                )
            n_success += inst.outcome == ClassLabel.SUCCESS
        self._counts = (n_success, len(self._instances) - n_success)
        self._matrix: np.ndarray | None = None

    def __len__(self) -> int:
        return len(self._instances)

    def __getitem__(self, index):
        if isinstance(index, slice):
            return LabeledStream(self._instances[index], self.schema)
        return self._instances[index]

    def __iter__(self) -> Iterator[Instance]:
        return iter(self._instances)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, LabeledStream):
            return NotImplemented
        return self.schema == other.schema and self._instances == other._instances

    def __repr__(self) -> str:
        s, f = self._counts
        return f"LabeledStream(n={len(self)}, success={s}, failure={f})"

    @property
    def instances(self) -> tuple[Instance, ...]:
        return self._instances

    def class_counts(self) -> tuple[int, int]:
        """(success, failure) counts."""
        return self._counts

    def count(self, label: ClassLabel) -> int:  # type: ignore[override]
        return self._counts[0] if label == ClassLabel.SUCCESS else self._counts[1]

    def feature_matrix(self) -> np.ndarray:
        if self._matrix is None:
            m = np.array([inst.features for inst in self._instances], dtype=float)
            self._matrix = m.reshape(len(self._instances), self.schema.n_features)
            self._matrix.flags.writeable = False
        return self._matrix

    def labels(self) -> np.ndarray:
        return np.fromiter((int(i.outcome) for i in self._instances), dtype=np.int64, count=len(self))


def sort_by_date(stream: LabeledStream) -> LabeledStream:
    """Stable chronological order; equal dates keep their current relative order."""
    return LabeledStream(sorted(stream, key=attrgetter("date")), stream.schema)


def _parse_provenance(row: int, kind: str, parents: str) -> Provenance:
    kind = kind.strip().lower()
    if kind in ("", "original"):
        return ORIGINAL
    if kind != "synthetic":
        raise RowError(row, f"unknown provenance {kind!r}")
    seed_id, sep, neighbor_id = parents.partition(";")
    if not sep or not seed_id or not neighbor_id:
        raise RowError(row, f"synthetic row needs 'seed;neighbor' parents, got {parents!r}")
    return Provenance.synthetic(seed_id, neighbor_id)


def parse_stream(source: IO[bytes] | IO[str] | bytes | str, schema: StreamSchema = DEFAULT_SCHEMA) -> LabeledStream:
    """Decode a CSV into a stream, preserving row order.

    ``source`` may be a binary or text file object, raw bytes, or CSV text.
    The id, provenance and parents columns are optional; every other header
    entry must be a schema column and every schema column must be present.
    """
    if isinstance(source, bytes):
        text = source.decode("utf-8-sig")
    elif isinstance(source, str):
        text = source
    else:
        data = source.read()
        text = data.decode("utf-8-sig") if isinstance(data, bytes) else data

    reader = csv.reader(io.StringIO(text, newline=""))
    try:
        header = [h.strip() for h in next(reader)]
    except StopIteration:
        raise SchemaError("empty input: header row required") from None

    optional = {schema.id_column, PROVENANCE_COLUMN, PARENTS_COLUMN}
    required = list(schema.metric_columns) + [schema.date_column, schema.outcome_column]
    known = set(required) | optional
    seen: set[str] = set()
    for name in header:
        if name not in known:
            raise SchemaError(f"unknown column {name!r}", name)
        if name in seen:
            raise SchemaError(f"column {name!r} appears twice", name)
        seen.add(name)
    for name in required:
        if name not in seen:
            raise SchemaError(f"missing column {name!r}", name)

    pos = {name: i for i, name in enumerate(header)}
    metric_pos = [pos[name] for name in schema.metric_columns]
    has_id = schema.id_column in pos
    has_prov = PROVENANCE_COLUMN in pos

    instances = []
    for row_no, cells in enumerate(reader, start=1):
        if not cells:
            continue
        if len(cells) != len(header):
            raise RowError(row_no, f"expected {len(header)} cells, found {len(cells)}")
        features = []
        for name, p in zip(schema.metric_columns, metric_pos):
            cell = cells[p].strip()
            if not cell:
                raise RowError(row_no, f"missing value for {name!r}")
            try:
                value = float(cell)
            except ValueError:
                raise RowError(row_no, f"non-numeric value {cell!r} for {name!r}") from None
            if not math.isfinite(value):
                raise RowError(row_no, f"non-finite value {cell!r} for {name!r}")
            features.append(value)
        raw_date = cells[pos[schema.date_column]].strip()
        try:
            date = datetime.strptime(raw_date, DATE_FORMAT)
        except ValueError:
            raise RowError(row_no, f"bad date {raw_date!r}, expected YYYY-MM-DDTHH:MM:SS") from None
        token = cells[pos[schema.outcome_column]]
        try:
            outcome = schema.decode_outcome(token)
        except KeyError:
            raise RowError(row_no, f"unknown outcome {token!r}") from None
        build_id = cells[pos[schema.id_column]].strip() if has_id else str(row_no)
        if not build_id:
            raise RowError(row_no, "empty build id")
        provenance = ORIGINAL
        if has_prov:
            parents = cells[pos[PARENTS_COLUMN]] if PARENTS_COLUMN in pos else ""
            provenance = _parse_provenance(row_no, cells[pos[PROVENANCE_COLUMN]], parents)
        instances.append(Instance(build_id, date, tuple(features), outcome, provenance))
    return LabeledStream(instances, schema)


def write_stream(stream: LabeledStream, out: IO[str], *, provenance: bool | None = None) -> None:
    """Write ``stream`` in the CSV dialect read by :func:`parse_stream`.

    Provenance columns are included when requested, or by default whenever
    the stream contains synthetic instances.  Floats use ``repr`` so values
    survive a round trip exactly.
    """
    schema = stream.schema
    if provenance is None:
        provenance = any(inst.provenance.is_synthetic for inst in stream)
    header = [schema.id_column, schema.date_column, *schema.metric_columns, schema.outcome_column]
    if provenance:
        header += [PROVENANCE_COLUMN, PARENTS_COLUMN]
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(header)
    for inst in stream:
        row = [inst.id, inst.date.strftime(DATE_FORMAT), *map(repr, inst.features), schema.encode_outcome(inst.outcome)]
        if provenance:
            p = inst.provenance
            row += [p.kind, f"{p.seed_id};{p.neighbor_id}" if p.is_synthetic else ""]
        writer.writerow(row)


def serialize_stream(stream: LabeledStream, *, provenance: bool | None = None) -> str:
    buf = io.StringIO()
    write_stream(stream, buf, provenance=provenance)
    return buf.getvalue()
