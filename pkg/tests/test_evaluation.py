from __future__ import annotations

import csv
import io
import json

import numpy as np
import pytest

from buildstream.adwin import AdwinDetector
from buildstream.datagen import GenSpec, generate_stream
from buildstream.evaluation import (
    SERIES_COLUMNS,
    EvaluationSeries,
    MajorityClassLearner,
    RunConfig,
    class_distribution_series,
    prequential_run,
)
from buildstream.hoeffding import HoeffdingTree, SplitConfig
from buildstream.stream import ClassLabel

from conftest import make_stream
from oracles import trailing_mean_naive


class Oracle:
    """Knows the labels in advance; used to check bookkeeping only."""

    def __init__(self, labels, invert=False):
        self.labels = list(labels)
        self.invert = invert
        self.i = 0

    def predict_one(self, x):
        y = self.labels[self.i] ^ int(self.invert)
        return ClassLabel(y), np.eye(2)[y]

    def learn_one(self, x, y):
        self.i += 1


class Constant:
    def __init__(self, label):
        self.label = label
        self.learned = 0

    def predict_one(self, x):
        return self.label, np.eye(2)[int(self.label)]

    def learn_one(self, x, y):
        self.learned += 1


class Peeker:
    """Predicts the label it was trained on last; succeeds only if labels leak."""

    def __init__(self):
        self.last = ClassLabel.SUCCESS

    def predict_one(self, x):
        return self.last, np.eye(2)[int(self.last)]

    def learn_one(self, x, y):
        self.last = ClassLabel(int(y))


def random_stream(rng, n, p_success=0.6, d=2):
    y = (rng.random(n) < p_success).astype(int)
    return make_stream(rng.normal(size=(n, d)), y)


def test_oracle_and_inverse(rng):
    stream = random_stream(rng, 300)
    good = prequential_run(stream, Oracle(stream.labels()), AdwinDetector())
    bad = prequential_run(stream, Oracle(stream.labels(), invert=True), AdwinDetector())
    assert np.all(good.cumulative_accuracy == 1.0)
    assert np.all(bad.cumulative_accuracy == 0.0)
    assert good.drift_points == []


def test_no_learn_stub_gives_prior_exactly(rng):
    stream = random_stream(rng, 1000)
    series = prequential_run(stream, Constant(ClassLabel.SUCCESS))
    s, _ = stream.class_counts()
    assert series.cumulative_accuracy[-1] == s / len(stream)
    np.testing.assert_array_equal(series.sensitivity_success[series.tp + series.fn > 0], 1.0)


def test_test_before_train(rng):
    # alternating labels: a learner that copies the last training label is always wrong
    stream = make_stream(np.zeros((50, 1)), [0, 1] * 25)
    series = prequential_run(stream, Peeker())
    assert series.cumulative_accuracy[-1] == 0.0


def test_majority_learner_converges_to_prior():
    finals = []
    for seed in range(20):
        rng = np.random.default_rng(seed)
        stream = random_stream(rng, 10_000, 0.6, d=1)
        finals.append(prequential_run(stream, MajorityClassLearner()).cumulative_accuracy[-1])
    finals = np.array(finals)
    assert np.all(np.abs(finals - 0.6) <= 0.02)


def test_confusion_and_rates_consistent(rng):
    stream = random_stream(rng, 2000, 0.55, d=3)
    tree = HoeffdingTree(3, SplitConfig(grace_period=50))
    series = prequential_run(stream, tree, AdwinDetector(), RunConfig(window_size=37))
    cols = series.columns()
    total = cols["tp"] + cols["fp"] + cols["tn"] + cols["fn"]
    np.testing.assert_array_equal(total, cols["index"])
    np.testing.assert_allclose(cols["cumulative_accuracy"], (cols["tp"] + cols["tn"]) / cols["index"])
    for name in SERIES_COLUMNS[1:9] + ("window_success_fraction",):
        assert np.all((cols[name] >= 0) & (cols[name] <= 1)), name
    tp, fp, tn, fn = (cols[k].astype(float) for k in ("tp", "fp", "tn", "fn"))
    m = tp + fn > 0
    np.testing.assert_allclose(cols["sensitivity_success"][m], tp[m] / (tp + fn)[m])
    m = tn + fp > 0
    np.testing.assert_allclose(cols["sensitivity_failure"][m], tn[m] / (tn + fp)[m])


@pytest.mark.parametrize("window", [1, 7, 100, 1000])
def test_windowed_accuracy_matches_recount(rng, window):
    stream = random_stream(rng, 1500)
    series = prequential_run(stream, MajorityClassLearner(), config=RunConfig(window_size=window))
    np.testing.assert_allclose(series.windowed_accuracy, trailing_mean_naive(series.correct.tolist(), window), atol=1e-12)
    np.testing.assert_allclose(
        series.window_success_fraction, trailing_mean_naive(stream.labels().tolist(), window), atol=1e-12
    )


def test_class_distribution_series():
    all_s = make_stream(np.zeros((20, 1)), [1] * 20)
    assert np.all(class_distribution_series(all_s, 5) == 1.0)
    alt = make_stream(np.zeros((20, 1)), [1, 0] * 10)
    assert np.all(class_distribution_series(alt, 2)[1:] == 0.5)
    with pytest.raises(ValueError):
        class_distribution_series(alt, 0)


def test_shifted_stream_distribution():
    from buildstream.smote import SmoteConfig, double_smote

    base = generate_stream(GenSpec(shift_point=90, post_shift_success_prob=0.75, seed=3))
    stream = double_smote(base, 900, SmoteConfig(seed=1))
    frac = class_distribution_series(stream, 100)
    assert len(stream) == 1990
    assert 0.35 <= frac[100:850].mean() <= 0.65
    assert frac[1000:].mean() >= 0.7


def test_drift_flags_and_reset(rng):
    y = rng.integers(0, 2, 4000)
    concept = np.where(np.arange(4000) < 2000, y, 1 - y)
    X = np.column_stack([concept * 5.0 + rng.normal(size=4000) * 0.5, rng.normal(size=4000)])
    stream = make_stream(X, y)

    class Counting(HoeffdingTree):
        resets = 0

        def reset(self):
            Counting.resets += 1
            super().reset()

    rec = prequential_run(stream, Counting(2, SplitConfig(grace_period=50)), AdwinDetector(), RunConfig(drift_action="record"))
    assert any(2000 < p < 2300 for p in rec.drift_points)
    model = Counting(2, SplitConfig(grace_period=50))
    Counting.resets = 0
    reset = prequential_run(stream, model, AdwinDetector(), RunConfig(drift_action="reset-tree"))
    assert Counting.resets == len(reset.drift_points) > 0
    assert reset.cumulative_accuracy[-1] > rec.cumulative_accuracy[-1]


def test_csv_and_summary(rng):
    stream = random_stream(rng, 250)
    series = prequential_run(stream, MajorityClassLearner(), AdwinDetector())
    rows = list(csv.DictReader(io.StringIO(series.to_csv())))
    assert len(rows) == 250
    assert tuple(rows[0]) == SERIES_COLUMNS
    assert int(rows[-1]["tp"]) + int(rows[-1]["fp"]) + int(rows[-1]["tn"]) + int(rows[-1]["fn"]) == 250
    summary = json.loads(series.summary_json())
    assert "\n" not in series.summary_json()
    assert summary["instances"] == 250
    assert summary["cumulative_accuracy"]["end"] == pytest.approx(series.cumulative_accuracy[-1], abs=1e-6)
    assert summary["cumulative_accuracy"]["start"] == pytest.approx(series.cumulative_accuracy[99], abs=1e-6)


def test_run_config_validation():
    with pytest.raises(ValueError):
        RunConfig(window_size=0)
    with pytest.raises(ValueError):
        RunConfig(drift_action="explode")


def test_empty_stream_rejected():
    with pytest.raises(ValueError):
        prequential_run(make_stream(np.zeros((0, 1)), []), MajorityClassLearner())


def test_series_direct():
    s = EvaluationSeries(np.array([1, 0, 1, 0]), np.array([1, 1, 0, 0]), np.zeros(4, bool), window_size=2)
    assert s.tp.tolist() == [1, 1, 1, 1]
    assert s.fp.tolist() == [0, 1, 1, 1]
    assert s.fn.tolist() == [0, 0, 1, 1]
    assert s.tn.tolist() == [0, 0, 0, 1]
    np.testing.assert_allclose(s.false_positive_rate, [0, 1, 1, 0.5])
    np.testing.assert_allclose(s.false_positive_rate_failure_positive, [0, 0, 0.5, 0.5])
