"""Lazy Parzen-window rules centred on a query.

A rule body is the L-infinity ball of a given half-width around the
(normalized) query; the head asserts one value for one label. For every
(label, value) pair the search scans a fixed schedule of growing half-widths
and keeps the window with the highest lower-confidence-bound quality
``p_hat - sqrt(1/n)``. Windows that cover nothing are skipped; ties go to the
smaller window.
"""

import math
from dataclasses import dataclass
from typing import NamedTuple, Sequence

import numpy as np

from .errors import ConfigError, DataError

#: Default number of half-widths in the search schedule.
DEFAULT_STEPS = 20
DEFAULT_MIN_WIDTH = 0.05

# max queries per distance block; bounds peak memory at ~chunk * M * d floats
_CHUNK = 64


class SearchSchedule:
    """Strictly increasing half-widths in (0, 1] ending exactly at 1.0."""

    def __init__(self, half_widths: Sequence[float]):
        widths = np.array(half_widths, dtype=np.float64)
        if widths.ndim != 1 or widths.size == 0:
            raise ConfigError("schedule must be a nonempty list of half-widths")
        if not (widths[0] > 0 and np.all(np.diff(widths) > 0)):
            raise ConfigError("schedule half-widths must be positive and strictly increasing")
        if widths[-1] != 1.0:
            raise ConfigError(f"schedule must end at 1.0, got {widths[-1]!r}")
        widths.setflags(write=False)
        self.half_widths = widths

    @classmethod
    def linear(cls, start: float = DEFAULT_MIN_WIDTH, stop: float = 1.0,
               steps: int = DEFAULT_STEPS) -> "SearchSchedule":
        if steps < 1:
            raise ConfigError("schedule needs at least one step")
        if steps == 1:
            return cls([stop])
        return cls(np.linspace(start, stop, steps))

    def __len__(self):
        return self.half_widths.size

    def __iter__(self):
        return iter(self.half_widths.tolist())

    def __eq__(self, other):
        return isinstance(other, SearchSchedule) and np.array_equal(self.half_widths, other.half_widths)

    def __repr__(self):
        return f"SearchSchedule({self.half_widths.tolist()!r})"


@dataclass(frozen=True, eq=False)
class WindowRule:
    center: np.ndarray
    half_width: float
    label_index: int
    head_value: int

    def __post_init__(self):
        if not 0 < self.half_width <= 1.0:
            raise ConfigError("half_width must lie in (0, 1]")
        if self.head_value not in (0, 1):
            raise ConfigError("head_value must be 0 or 1")


class RuleStats(NamedTuple):
    n: int
    n_agree: int

    @property
    def p_hat(self) -> float:
        return self.n_agree / self.n


class BestRule(NamedTuple):
    best_eval: float
    best_half_width: float
    best_stats: RuleStats


def evaluate_rule(stats: RuleStats) -> float:
    """Lower confidence bound ``p_hat - sqrt(1/n)`` of a rule's precision."""
    if stats.n < 1:
        raise ValueError("rule quality is undefined for an empty window")
    return stats.n_agree / stats.n - math.sqrt(1.0 / stats.n)


def _excluded_mask(n_rows: int, excluded) -> np.ndarray:
    mask = np.zeros(n_rows, dtype=bool)
    if excluded is not None:
        idx = np.fromiter(excluded, dtype=np.intp) if not isinstance(excluded, np.ndarray) else excluded
        mask[idx] = True
    return mask


def chebyshev_distances(queries, features) -> np.ndarray:
    """``(Q, M)`` matrix of L-infinity distances between query and training rows."""
    queries = np.atleast_2d(np.asarray(queries, dtype=np.float64))
    features = np.asarray(features, dtype=np.float64)
    if queries.shape[1] != features.shape[1]:
        raise DataError(f"query has {queries.shape[1]} features, data has {features.shape[1]}")
    out = np.empty((queries.shape[0], features.shape[0]))
    for start in range(0, queries.shape[0], _CHUNK):
        block = queries[start:start + _CHUNK]
        out[start:start + _CHUNK] = np.abs(block[:, None, :] - features[None, :, :]).max(axis=2)
    return out


def coverage(rule: WindowRule, dataset, excluded=()) -> list:
    """Ascending indices of rows inside the rule's window, minus ``excluded``."""
    dist = chebyshev_distances(rule.center, dataset.features)[0]
    inside = (dist <= rule.half_width) & ~_excluded_mask(dataset.n_instances, excluded)
    return np.flatnonzero(inside).tolist()


class WindowSearch(NamedTuple):
    """Vectorized search results for Q queries, K labels and both head values.

    ``evals[q, k, v]`` is the best rule quality, ``width_index[q, k, v]`` the
    schedule position it was reached at, and ``n``/``n_agree`` its counts.
    """

    evals: np.ndarray
    width_index: np.ndarray
    n: np.ndarray
    n_agree: np.ndarray


def window_counts(dist: np.ndarray, labels: np.ndarray, schedule: SearchSchedule):
    """Coverage counts per query and half-width, and positive counts per label.

    ``dist`` holds distances with excluded rows already set to ``inf``.
    Returns ``n`` with shape ``(Q, S)`` and ``n_pos`` with shape ``(Q, S, K)``.
    """
    widths = schedule.half_widths
    n = np.empty((dist.shape[0], widths.size), dtype=np.int64)
    n_pos = np.empty((dist.shape[0], widths.size, labels.shape[1]), dtype=np.int64)
    lab = labels.astype(np.int64)
    for start in range(0, dist.shape[0], _CHUNK):
        covered = (dist[start:start + _CHUNK, :, None] <= widths).astype(np.int64)
        n[start:start + _CHUNK] = covered.sum(axis=1)
        n_pos[start:start + _CHUNK] = np.einsum("qms,mk->qsk", covered, lab)
    return n, n_pos


def search_windows(dist: np.ndarray, labels: np.ndarray, schedule: SearchSchedule) -> WindowSearch:
    """Best window per (query, label, head value) from a distance matrix."""
    n, n_pos = window_counts(dist, labels, schedule)
    if np.any(n[:, -1] == 0):
        raise DataError("a query has no training rows left to cover")
    agree = np.stack([n[:, :, None] - n_pos, n_pos], axis=-1)  # (Q, S, K, 2)
    n_b = np.broadcast_to(n[:, :, None, None], agree.shape)
    with np.errstate(divide="ignore", invalid="ignore"):
        quality = agree / n_b - np.sqrt(1.0 / n_b)
    quality = np.where(n_b > 0, quality, -np.inf)
    best = np.argmax(quality, axis=1)  # first maximum = smallest half-width
    take = best[:, None, :, :]
    return WindowSearch(
        evals=np.take_along_axis(quality, take, axis=1)[:, 0],
        width_index=best,
        n=np.take_along_axis(n_b, take, axis=1)[:, 0],
        n_agree=np.take_along_axis(agree, take, axis=1)[:, 0],
    )


def best_rule(query, label_index: int, head_value: int, dataset, excluded=(),
              schedule: SearchSchedule = None) -> BestRule:
    """Best scheduled window around ``query`` predicting ``head_value`` for one label."""
    if schedule is None:
        schedule = SearchSchedule.linear()
    if head_value not in (0, 1):
        raise ConfigError("head_value must be 0 or 1")
    dist = chebyshev_distances(query, dataset.features)
    dist[:, _excluded_mask(dataset.n_instances, excluded)] = np.inf
    found = search_windows(dist, dataset.labels[:, [label_index]], schedule)
    s = found.width_index[0, 0, head_value]
    return BestRule(
        best_eval=float(found.evals[0, 0, head_value]),
        best_half_width=float(schedule.half_widths[s]),
        best_stats=RuleStats(int(found.n[0, 0, head_value]), int(found.n_agree[0, 0, head_value])),
    )
