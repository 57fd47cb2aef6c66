"""Conformal calibration of lazily induced Parzen-window rules for multi-label classification."""

__version__ = "0.1.0"

from .conformal import (
    CalibrationTable, ConformalRuleModel, PlausibilityPair, calibrate, calibrate_all,
    conformity, p_value, plausibility, plausibility_pair,
)
from .data import (
    MultiLabelDataset, NormalizationModel, SplitSpec, fit_normalizer, load_dataset,
    parse_arff, parse_csv, random_split, read_label_xml,
)
from .decision import DecisionConfig, LabelDecision, Mode, Outcome, decide, predict_instance
from .evaluation import (
    ExperimentConfig, ExperimentResult, MetricReport, dump_conformity_distributions,
    hamming_loss, micro_f1, rejection_curve, run_experiment, theta_sweep,
)
from .rules import RuleStats, SearchSchedule, WindowRule, best_rule, coverage, evaluate_rule
