"""Metrics, threshold sweeps, accuracy-rejection curves and the repeated-split protocol."""

import io
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import List, NamedTuple, Sequence

import numpy as np

from .conformal import ConformalRuleModel, loo_conformities
from .data import MultiLabelDataset, SplitSpec, fit_normalizer, random_split
from .decision import ABSTAIN, DecisionConfig, LabelDecision, Mode, decide_array
from .errors import ConfigError, UndefinedMetricError
from .rules import SearchSchedule

DEFAULT_THETA_GRID = (0.25, 0.5, 0.75, 1.0, 1.5, 2.0, 3.0, 4.0)
DEFAULT_ABSTENTION_GRID = tuple(round(0.05 * i, 2) for i in range(11))


def _codes(decisions) -> np.ndarray:
    """Integer decision codes from an array or from nested lists of :class:`LabelDecision`."""
    if isinstance(decisions, np.ndarray):
        return decisions.astype(np.int8)
    rows = [[int(d.outcome) if isinstance(d, LabelDecision) else int(d) for d in row] for row in decisions]
    return np.array(rows, dtype=np.int8)


def _contingency(truth, decisions):
    y = np.asarray(truth, dtype=np.int8)
    d = _codes(decisions)
    if y.shape != d.shape:
        raise ValueError(f"truth shape {y.shape} does not match decisions shape {d.shape}")
    kept = d != ABSTAIN
    if not kept.any():
        raise UndefinedMetricError("every (instance, label) pair was abstained on")
    y, d = y[kept], d[kept]
    tp = int(np.count_nonzero((y == 1) & (d == 1)))
    fp = int(np.count_nonzero((y == 0) & (d == 1)))
    fn = int(np.count_nonzero((y == 1) & (d == 0)))
    return tp, fp, fn, int(y.size)


def hamming_loss(truth, decisions) -> float:
    """Mismatch rate over the pairs that were not abstained on."""
    tp, fp, fn, n = _contingency(truth, decisions)
    return (fp + fn) / n


def micro_f1(truth, decisions) -> float:
    """Pooled ``2TP / (2TP + FP + FN)`` over non-abstained pairs; 1.0 when all counts are zero."""
    tp, fp, fn, _ = _contingency(truth, decisions)
    if tp == fp == fn == 0:
        return 1.0
    return 2 * tp / (2 * tp + fp + fn)


class MetricReport(NamedTuple):
    hamming_loss: float
    micro_f1: float
    n_evaluated: int
    rejection_rate: float

    @property
    def defined(self) -> bool:
        return self.n_evaluated > 0


def metric_report(truth, codes: np.ndarray) -> MetricReport:
    truth = np.asarray(truth)
    total = truth.size
    n_eval = int(np.count_nonzero(codes != ABSTAIN))
    rejection = (total - n_eval) / total
    if n_eval == 0:
        return MetricReport(math.nan, math.nan, 0, rejection)
    return MetricReport(hamming_loss(truth, codes), micro_f1(truth, codes), n_eval, rejection)


def sweep_pairs(truth, pairs: np.ndarray, theta_grid: Sequence[float]) -> List[tuple]:
    return [(float(t), metric_report(truth, decide_array(pairs, DecisionConfig(theta=t))))
            for t in theta_grid]


def rejection_pairs(truth, pairs: np.ndarray, abstention_grid: Sequence[float], theta: float = 1.0) -> List[tuple]:
    out = []
    for a in abstention_grid:
        config = DecisionConfig(theta=theta, abstention_threshold=a, mode=Mode.ABSTAIN)
        out.append((float(a), metric_report(truth, decide_array(pairs, config))))
    return out


def theta_sweep(model: ConformalRuleModel, test: MultiLabelDataset, theta_grid: Sequence[float]) -> List[tuple]:
    """Force-mode reports for each theta; plausibilities are computed once."""
    return sweep_pairs(test.labels, model.plausibilities(test.features), theta_grid)


def rejection_curve(model: ConformalRuleModel, test: MultiLabelDataset,
                    abstention_grid: Sequence[float], theta: float = 1.0) -> List[tuple]:
    """Abstain-mode reports per abstention threshold. Undefined metrics are NaN with ``n_evaluated == 0``."""
    return rejection_pairs(test.labels, model.plausibilities(test.features), abstention_grid, theta)


# ---------------------------------------------------------------------------
# experiment protocol


@dataclass(frozen=True)
class ExperimentConfig:
    n_splits: int = 50
    n_train: int = 400
    base_seed: int = 2020
    theta_grid: tuple = DEFAULT_THETA_GRID
    abstention_grid: tuple = DEFAULT_ABSTENTION_GRID
    rejection_theta: float = 1.0
    schedule: SearchSchedule = field(default_factory=SearchSchedule.linear)

    def __post_init__(self):
        if self.n_splits < 1:
            raise ConfigError(f"n_splits must be >= 1, got {self.n_splits}")
        if self.n_train < 1:
            raise ConfigError(f"n_train must be >= 1, got {self.n_train}")
        for name in ("theta_grid", "abstention_grid"):
            grid = tuple(float(g) for g in getattr(self, name))
            if not grid or list(grid) != sorted(grid):
                raise ConfigError(f"{name} must be nonempty and sorted ascending")
            object.__setattr__(self, name, grid)
        if any(t <= 0 for t in self.theta_grid):
            raise ConfigError("theta_grid values must be positive")
        if any(not 0 <= a <= 1 for a in self.abstention_grid):
            raise ConfigError("abstention_grid values must lie in [0, 1]")

    def as_dict(self) -> dict:
        return {
            "n_splits": self.n_splits,
            "n_train": self.n_train,
            "base_seed": self.base_seed,
            "theta_grid": list(self.theta_grid),
            "abstention_grid": list(self.abstention_grid),
            "rejection_theta": self.rejection_theta,
            "schedule": self.schedule.half_widths.tolist(),
        }


class SplitResult(NamedTuple):
    split_index: int
    n_train: int
    n_test: int
    theta: List[tuple]
    rejection: List[tuple]


def evaluate_split(train: MultiLabelDataset, test: MultiLabelDataset, config: ExperimentConfig,
                   split_index: int = 0) -> SplitResult:
    model = ConformalRuleModel(config.schedule).fit(train)
    pairs = model.plausibilities(test.features)
    return SplitResult(
        split_index, train.n_instances, test.n_instances,
        sweep_pairs(test.labels, pairs, config.theta_grid),
        rejection_pairs(test.labels, pairs, config.abstention_grid, config.rejection_theta),
    )


def _run_split(dataset: MultiLabelDataset, config: ExperimentConfig, split_index: int) -> SplitResult:
    train_idx, test_idx = random_split(
        dataset.n_instances, SplitSpec(config.base_seed, config.n_train, split_index))
    return evaluate_split(dataset.subset(train_idx), dataset.subset(test_idx), config, split_index)


def _fmt(x) -> str:
    return "nan" if isinstance(x, float) and math.isnan(x) else f"{x:.6g}"


def _mean_std(values):
    values = [v for v in values if not math.isnan(v)]
    if not values:
        return math.nan, math.nan
    arr = np.array(values)
    return float(arr.mean()), float(arr.std())


@dataclass
class ExperimentResult:
    """Per-split reports plus pointwise averages over splits (population std)."""

    config: ExperimentConfig
    splits: List[SplitResult]

    def theta_curve(self) -> List[dict]:
        rows = []
        for i, theta in enumerate(self.config.theta_grid):
            reports = [s.theta[i][1] for s in self.splits]
            h_mean, h_std = _mean_std([r.hamming_loss for r in reports])
            f_mean, f_std = _mean_std([r.micro_f1 for r in reports])
            rows.append(dict(theta=theta, hamming_mean=h_mean, hamming_std=h_std, f1_mean=f_mean, f1_std=f_std))
        return rows

    def rejection_curve(self) -> List[dict]:
        """Means use only the splits where the metric is defined; ``undefined_flag`` marks
        grid points where at least one split abstained on everything."""
        rows = []
        for i, threshold in enumerate(self.config.abstention_grid):
            reports = [s.rejection[i][1] for s in self.splits]
            h_mean, h_std = _mean_std([r.hamming_loss for r in reports])
            f_mean, f_std = _mean_std([r.micro_f1 for r in reports])
            rows.append(dict(
                threshold=threshold,
                rejection_rate_mean=float(np.mean([r.rejection_rate for r in reports])),
                hamming_mean=h_mean, hamming_std=h_std, f1_mean=f_mean, f1_std=f_std,
                undefined_flag=int(any(not r.defined for r in reports)),
            ))
        return rows

    def theta_curve_csv(self) -> str:
        return _to_csv(self.theta_curve(), ["theta", "hamming_mean", "hamming_std", "f1_mean", "f1_std"])

    def rejection_curve_csv(self) -> str:
        return _to_csv(self.rejection_curve(), ["threshold", "rejection_rate_mean", "hamming_mean",
                                                "hamming_std", "f1_mean", "f1_std", "undefined_flag"])


def _to_csv(rows: List[dict], columns: List[str]) -> str:
    out = io.StringIO()
    out.write(",".join(columns) + "\n")
    for row in rows:
        out.write(",".join(str(row[c]) if isinstance(row[c], int) else _fmt(row[c]) for c in columns) + "\n")
    return out.getvalue()


def run_experiment(dataset: MultiLabelDataset, config: ExperimentConfig, jobs: int = 1) -> ExperimentResult:
    """Repeat split / fit / evaluate ``config.n_splits`` times.

    ``jobs > 1`` evaluates splits in worker processes; results are collected in
    split order so outputs do not depend on ``jobs``. ``jobs = 0`` uses every core.
    A failing split propagates its exception.
    """
    if not 0 < config.n_train < dataset.n_instances:
        raise ConfigError(f"n_train={config.n_train} must be below N={dataset.n_instances}")
    indices = range(config.n_splits)
    if jobs == 1 or config.n_splits == 1:
        splits = [_run_split(dataset, config, i) for i in indices]
    else:
        with ProcessPoolExecutor(max_workers=jobs or None) as pool:
            splits = list(pool.map(_run_split, [dataset] * config.n_splits, [config] * config.n_splits, indices))
    return ExperimentResult(config, splits)


# ---------------------------------------------------------------------------
# conformity distributions


class ConformityRow(NamedTuple):
    true_value: int
    c_pos: float
    c_neg: float
    q_pos: float
    q_neg: float


def _strict_rank(scores: np.ndarray, c: float, drop_self: bool) -> float:
    # own score equals c, so it never counts as strictly below; it only leaves the denominator
    size = scores.size - (1 if drop_self else 0)
    if size <= 0:
        return 0.0
    return int(np.searchsorted(scores, c, side="left")) / size


def dump_conformity_distributions(dataset: MultiLabelDataset, train_indices, label_index: int,
                                  schedule: SearchSchedule = None) -> List[ConformityRow]:
    """Leave-one-out conformities and plausibilities of both values for every training row.

    Each row's plausibilities are computed against the calibration table with
    that row's own score removed.
    """
    schedule = schedule if schedule is not None else SearchSchedule.linear()
    train_indices = np.asarray(train_indices, dtype=np.intp)
    train = fit_normalizer(dataset, train_indices).transform(dataset.subset(train_indices))
    loo = loo_conformities(train, schedule)[:, label_index, :]
    y = train.labels[:, label_index]
    pos_scores = np.sort(loo[y == 1, 1])
    neg_scores = np.sort(loo[y == 0, 0])
    rows = []
    for yi, (c_neg, c_pos) in zip(y, loo):
        rows.append(ConformityRow(
            true_value=int(yi),
            c_pos=float(c_pos),
            c_neg=float(c_neg),
            q_pos=_strict_rank(pos_scores, c_pos, drop_self=yi == 1),
            q_neg=_strict_rank(neg_scores, c_neg, drop_self=yi == 0),
        ))
    return rows


def conformity_dump_csv(rows: Sequence[ConformityRow]) -> str:
    out = io.StringIO()
    out.write("true_value,c_pos,c_neg,q_pos,q_neg\n")
    for r in rows:
        out.write(f"{r.true_value},{_fmt(r.c_pos)},{_fmt(r.c_neg)},{_fmt(r.q_pos)},{_fmt(r.q_neg)}\n")
    return out.getvalue()
