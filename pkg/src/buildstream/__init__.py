"""Stream mining of software build outcomes: SMOTE, Hoeffding trees, ADWIN."""

__version__ = "0.1.0"

from .adwin import AdwinDetector, DriftReport, cut_threshold
from .datagen import GenSpec, generate_stream
from .evaluation import EvaluationSeries, MajorityClassLearner, RunConfig, class_distribution_series, prequential_run
from .hoeffding import HoeffdingTree, LeafStats, SplitConfig, attempt_split, export_dot, hoeffding_bound, info_gain
from .smote import SmoteConfig, double_smote, k_nearest_same_class, smote_pass, synthesize
from .stream import (
    ClassLabel,
    Instance,
    LabeledStream,
    Provenance,
    StreamSchema,
    parse_stream,
    serialize_stream,
    sort_by_date,
)

__all__ = [
    "AdwinDetector",
    "ClassLabel",
    "DriftReport",
    "EvaluationSeries",
    "GenSpec",
    "HoeffdingTree",
    "Instance",
    "LabeledStream",
    "LeafStats",
    "MajorityClassLearner",
    "Provenance",
    "RunConfig",
    "SmoteConfig",
    "SplitConfig",
    "StreamSchema",
    "attempt_split",
    "class_distribution_series",
    "cut_threshold",
    "double_smote",
    "export_dot",
    "generate_stream",
    "hoeffding_bound",
    "info_gain",
    "k_nearest_same_class",
    "parse_stream",
    "prequential_run",
    "serialize_stream",
    "smote_pass",
    "sort_by_date",
    "synthesize",
]
