"""Prequential (test-then-train) evaluation and its output series.

Success is the positive class: TP counts successes predicted as success,
FP counts failures predicted as success.
"""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass, field
from typing import IO, Protocol

import numpy as np

from .adwin import AdwinDetector
from .hoeffding import SplitConfig
from .smote import SmoteConfig
from .stream import ClassLabel, LabeledStream

DRIFT_ACTIONS = ("record", "reset-tree")

SERIES_COLUMNS = (
    "index",
    "cumulative_accuracy",
    "windowed_accuracy",
    "sensitivity_success",
    "sensitivity_failure",
    "precision_success",
    "precision_failure",
    "false_positive_rate",
    "false_positive_rate_failure_positive",
    "tp",
    "fp",
    "tn",
    "fn",
    "window_success_fraction",
    "drift_flag",
)


class Learner(Protocol):
    def predict_one(self, x) -> tuple[ClassLabel, np.ndarray]: ...

    def learn_one(self, x, y: ClassLabel): ...


class MajorityClassLearner:
    """Predicts the most frequent label seen so far (success on ties)."""

    def __init__(self):
        self.reset()

    def reset(self) -> None:
        self.counts = np.zeros(2)

    def predict_one(self, x):
        scores = (self.counts + 1.0) / (self.counts.sum() + 2.0)
        label = ClassLabel.SUCCESS if self.counts[1] >= self.counts[0] else ClassLabel.FAILURE
        return label, scores

    def learn_one(self, x, y):
        self.counts[int(y)] += 1


@dataclass(frozen=True)
class RunConfig:
    window_size: int = 100
    drift_action: str = "record"
    seed: int = 0
    split: SplitConfig = field(default_factory=SplitConfig)
    smote: SmoteConfig = field(default_factory=SmoteConfig)

    def __post_init__(self) -> None:
        if self.window_size < 1:
            raise ValueError(f"window size must be >= 1, got {self.window_size}")
        if self.drift_action not in DRIFT_ACTIONS:
            raise ValueError(f"drift action must be one of {DRIFT_ACTIONS}, got {self.drift_action!r}")


def _ratio(num: np.ndarray, den: np.ndarray) -> np.ndarray:
    # undefined rates (zero denominator) are reported as 0
    out = np.zeros(len(num))
    np.divide(num, den, out=out, where=den > 0)
    return out


def _trailing_mean(values: np.ndarray, window: int) -> np.ndarray:
    c = np.concatenate(([0], np.cumsum(values, dtype=np.int64)))
    idx = np.arange(1, len(values) + 1)
    lo = np.maximum(idx - window, 0)
    return (c[idx] - c[lo]) / (idx - lo)


@dataclass
class EvaluationSeries:
    """Per-step prequential results; every array has one entry per instance."""

    y_true: np.ndarray
    y_pred: np.ndarray
    drift: np.ndarray
    window_size: int = 100

    def __post_init__(self) -> None:
        t, p = self.y_true.astype(bool), self.y_pred.astype(bool)
        self.tp = np.cumsum(t & p)
        self.fp = np.cumsum(~t & p)
        self.tn = np.cumsum(~t & ~p)
        self.fn = np.cumsum(t & ~p)
        self.index = np.arange(1, len(t) + 1)

    def __len__(self) -> int:
        return len(self.y_true)

    @property
    def correct(self) -> np.ndarray:
        return (self.y_true == self.y_pred).astype(np.int64)

    @property
    def cumulative_accuracy(self) -> np.ndarray:
        return (self.tp + self.tn) / self.index

    @property
    def windowed_accuracy(self) -> np.ndarray:
        return _trailing_mean(self.correct, self.window_size)

    @property
    def sensitivity_success(self) -> np.ndarray:
        return _ratio(self.tp, self.tp + self.fn)

    @property
    def sensitivity_failure(self) -> np.ndarray:
        return _ratio(self.tn, self.tn + self.fp)

    @property
    def precision_success(self) -> np.ndarray:
        return _ratio(self.tp, self.tp + self.fp)

    @property
    def precision_failure(self) -> np.ndarray:
        return _ratio(self.tn, self.tn + self.fn)

    @property
    def false_positive_rate(self) -> np.ndarray:
        return _ratio(self.fp, self.fp + self.tn)

    @property
    def false_positive_rate_failure_positive(self) -> np.ndarray:
        return _ratio(self.fn, self.fn + self.tp)

    @property
    def window_success_fraction(self) -> np.ndarray:
        return _trailing_mean(self.y_true.astype(np.int64), self.window_size)

    @property
    def drift_points(self) -> list[int]:
        return [int(i) for i in self.index[self.drift.astype(bool)]]

    def columns(self) -> dict[str, np.ndarray]:
        return {
            "index": self.index,
            "cumulative_accuracy": self.cumulative_accuracy,
            "windowed_accuracy": self.windowed_accuracy,
            "sensitivity_success": self.sensitivity_success,
            "sensitivity_failure": self.sensitivity_failure,
            "precision_success": self.precision_success,
            "precision_failure": self.precision_failure,
            "false_positive_rate": self.false_positive_rate,
            "false_positive_rate_failure_positive": self.false_positive_rate_failure_positive,
            "tp": self.tp,
            "fp": self.fp,
            "tn": self.tn,
            "fn": self.fn,
            "window_success_fraction": self.window_success_fraction,
            "drift_flag": self.drift.astype(np.int64),
        }

    def write_csv(self, out: IO[str]) -> None:
        cols = self.columns()
        writer = csv.writer(out, lineterminator="\n")
        writer.writerow(SERIES_COLUMNS)
        floats = {k for k, v in cols.items() if v.dtype.kind == "f"}
        for i in range(len(self)):
            writer.writerow(
                f"{cols[k][i]:.6f}" if k in floats else int(cols[k][i]) for k in SERIES_COLUMNS
            )

    def to_csv(self) -> str:
        buf = io.StringIO()
        self.write_csv(buf)
        return buf.getvalue()

    def summary(self) -> dict:
        """Start, end and average of the accuracy-style curves.

        "start" is read once the first full window has been seen (or at the
        last step for shorter runs), matching where plotted curves begin.
        """
        n = len(self)
        if n == 0:
            return {"instances": 0}
        start = min(self.window_size, n) - 1
        out: dict = {"instances": n, "drift_points": self.drift_points, "start_index": start + 1}
        for name in ("cumulative_accuracy", "windowed_accuracy", "sensitivity_success", "sensitivity_failure"):
            series = getattr(self, name)
            out[name] = {
                "start": round(float(series[start]), 6),
                "end": round(float(series[-1]), 6),
                "average": round(float(series.mean()), 6),
            }
        out["confusion"] = {"tp": int(self.tp[-1]), "fp": int(self.fp[-1]), "tn": int(self.tn[-1]), "fn": int(self.fn[-1])}
        return out

    def summary_json(self) -> str:
        return json.dumps(self.summary(), sort_keys=True, separators=(", ", ": "))


def prequential_run(
    stream: LabeledStream,
    model: Learner,
    detector: AdwinDetector | None = None,
    config: RunConfig | None = None,
) -> EvaluationSeries:
    """Test each instance, feed the 0/1 error to the detector, then train on it.

    With ``drift_action="reset-tree"`` the model's ``reset()`` is called at
    every detected drift.
    """
    config = config or RunConfig()
    if not len(stream):
        raise ValueError("cannot evaluate an empty stream")
    X = stream.feature_matrix()
    y = stream.labels()
    y_pred = np.empty(len(y), dtype=np.int64)
    drift = np.zeros(len(y), dtype=bool)
    for i in range(len(y)):
        label, _ = model.predict_one(X[i])
        y_pred[i] = int(label)
        if detector is not None:
            report = detector.add_observation(float(y_pred[i] != y[i]))
            if report.detected:
                drift[i] = True
                if config.drift_action == "reset-tree":
                    model.reset()
        model.learn_one(X[i], ClassLabel(int(y[i])))
    return EvaluationSeries(y, y_pred, drift, config.window_size)


def class_distribution_series(stream: LabeledStream, window: int) -> np.ndarray:
    """Fraction of successes among the last ``window`` instances, per step."""
    if window < 1:
        raise ValueError(f"window must be >= 1, got {window}")
    return _trailing_mean(stream.labels(), window)

