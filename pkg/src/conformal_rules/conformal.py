"""Conformity scores, leave-one-out calibration and plausibilities.

The conformity of a candidate value ``v`` of label ``k`` for a query is the
quality of the best window rule predicting ``v``. Every training row is scored
the same way with itself left out; those scores, split by the row's true
value, form the label's calibration table. A query's plausibility for ``v``
is the fraction of same-value calibration scores it strictly exceeds.
"""

import bisect
import io
from dataclasses import dataclass
from typing import List, NamedTuple, Sequence

import numpy as np

from .data import MultiLabelDataset, NormalizationModel, fit_normalizer
from .errors import DataError
from .rules import SearchSchedule, best_rule, chebyshev_distances, search_windows


def conformity(query, label_index: int, value: int, dataset: MultiLabelDataset,
               excluded=(), schedule: SearchSchedule = None) -> float:
    return best_rule(query, label_index, value, dataset, excluded, schedule).best_eval


@dataclass(frozen=True)
class CalibrationTable:
    """Sorted leave-one-out conformities of one label, split by true value."""

    label_index: int
    scores_pos: tuple
    scores_neg: tuple

    def scores(self, value: int) -> tuple:
        return self.scores_pos if value == 1 else self.scores_neg

    def to_csv_rows(self) -> List[tuple]:
        rows = [(self.label_index, 0, s) for s in self.scores_neg]
        rows += [(self.label_index, 1, s) for s in self.scores_pos]
        return rows


class PlausibilityPair(NamedTuple):
    q0: float
    q1: float


def loo_conformities(dataset: MultiLabelDataset, schedule: SearchSchedule) -> np.ndarray:
    """``(N, K, 2)`` leave-one-out conformities for both head values of every label."""
    if dataset.n_instances < 2:
        raise DataError("leave-one-out calibration needs at least 2 training rows")
    dist = chebyshev_distances(dataset.features, dataset.features)
    np.fill_diagonal(dist, np.inf)
    return search_windows(dist, dataset.labels, schedule).evals


def _tables_from_scores(loo: np.ndarray, labels: np.ndarray) -> List[CalibrationTable]:
    tables = []
    for k in range(labels.shape[1]):
        pos = labels[:, k] == 1
        tables.append(CalibrationTable(
            label_index=k,
            scores_pos=tuple(np.sort(loo[pos, k, 1]).tolist()),
            scores_neg=tuple(np.sort(loo[~pos, k, 0]).tolist()),
        ))
    return tables


def calibrate_all(dataset: MultiLabelDataset, schedule: SearchSchedule) -> List[CalibrationTable]:
    """One calibration table per label, sharing a single distance computation."""
    return _tables_from_scores(loo_conformities(dataset, schedule), dataset.labels)


def calibrate(dataset: MultiLabelDataset, label_index: int, schedule: SearchSchedule) -> CalibrationTable:
    if dataset.n_instances < 2:
        raise DataError("leave-one-out calibration needs at least 2 training rows")
    sub = MultiLabelDataset(dataset.features, dataset.labels[:, [label_index]],
                            dataset.feature_names, (dataset.label_names[label_index],))
    table = calibrate_all(sub, schedule)[0]
    return CalibrationTable(label_index, table.scores_pos, table.scores_neg)


def plausibility(c: float, table: CalibrationTable, value: int) -> float:
    """Fraction of same-value calibration scores strictly below ``c`` (0 if there are none)."""
    scores = table.scores(value)
    if not scores:
        return 0.0
    return bisect.bisect_left(scores, float(c)) / len(scores)


def plausibility_pair(query, label_index: int, table: CalibrationTable,
                      dataset: MultiLabelDataset, schedule: SearchSchedule) -> PlausibilityPair:
    c1 = conformity(query, label_index, 1, dataset, (), schedule)
    c0 = conformity(query, label_index, 0, dataset, (), schedule)
    return PlausibilityPair(plausibility(c0, table, 0), plausibility(c1, table, 1))


def p_value(calibration_scores: Sequence[float], alpha_new: float) -> float:
    """Classical conformal p-value of a nonconformity score; the new point counts itself."""
    scores = np.asarray(calibration_scores, dtype=np.float64)
    return (int(np.count_nonzero(scores >= alpha_new)) + 1) / (scores.size + 1)


def tables_to_csv(tables: Sequence[CalibrationTable]) -> str:
    out = io.StringIO()
    out.write("label_index,true_value,score\n")
    for table in tables:
        for k, v, s in table.to_csv_rows():
            out.write(f"{k},{v},{s:.6g}\n")
    return out.getvalue()


class ConformalRuleModel:
    """Lazy conformal rule classifier fitted on one training set.

    Fitting only normalizes the training features and builds the K
    calibration tables; rules are induced per query at prediction time.

    Parameters
    ----------
    schedule : SearchSchedule, optional
        Half-widths scanned by the window search. Defaults to 20 linearly
        spaced widths from 0.05 to 1.0.
    """

    def __init__(self, schedule: SearchSchedule = None):
        self.schedule = schedule if schedule is not None else SearchSchedule.linear()
        self.normalizer: NormalizationModel = None
        self.train: MultiLabelDataset = None
        self.tables: List[CalibrationTable] = None

    def fit(self, dataset: MultiLabelDataset, normalizer: NormalizationModel = None) -> "ConformalRuleModel":
        if normalizer is None:
            normalizer = fit_normalizer(dataset, np.arange(dataset.n_instances))
        self.normalizer = normalizer
        self.train = normalizer.transform(dataset)
        self.tables = calibrate_all(self.train, self.schedule)
        return self

    @property
    def label_names(self):
        return self.train.label_names

    def conformities(self, X) -> np.ndarray:
        """``(Q, K, 2)`` conformities of raw query rows against the full training set."""
        queries = self.normalizer.apply(np.atleast_2d(X))
        dist = chebyshev_distances(queries, self.train.features)
        return search_windows(dist, self.train.labels, self.schedule).evals

    def plausibilities(self, X) -> np.ndarray:
        """``(Q, K, 2)`` array with ``[..., 0] = q0`` and ``[..., 1] = q1``."""
        conf = self.conformities(X)
        out = np.empty_like(conf)
        for k, table in enumerate(self.tables):
            for v in (0, 1):
                scores = np.asarray(table.scores(v))
                if scores.size == 0:
                    out[:, k, v] = 0.0
                else:
                    out[:, k, v] = np.searchsorted(scores, conf[:, k, v], side="left") / scores.size
        return out
