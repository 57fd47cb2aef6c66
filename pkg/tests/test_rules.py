import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

import oracle
from conftest import random_normalized_dataset
from conformal_rules.data import MultiLabelDataset
from conformal_rules.errors import ConfigError
from conformal_rules.rules import (
    RuleStats, SearchSchedule, WindowRule, best_rule, chebyshev_distances, coverage, evaluate_rule,
    window_counts,
)


def line_dataset(xs, ys):
    return MultiLabelDataset(np.array(xs, dtype=float)[:, None], np.array(ys)[:, None], ["x"], ["y"])


def test_default_schedule():
    s = SearchSchedule.linear()
    assert len(s) == 20
    assert s.half_widths[0] == 0.05 and s.half_widths[-1] == 1.0
    assert np.allclose(np.diff(s.half_widths), 0.05)


@pytest.mark.parametrize("widths", [[], [0.5], [0.5, 0.5, 1.0], [0.0, 1.0], [0.7, 0.3, 1.0]])
def test_invalid_schedules(widths):
    with pytest.raises(ConfigError):
        SearchSchedule(widths)


def test_coverage_full_window():
    ds = line_dataset([0.0, 0.2, 0.5, 0.9, 1.0], [0] * 5)
    assert coverage(WindowRule(np.array([0.5]), 1.0, 0, 1), ds) == [0, 1, 2, 3, 4]


def test_coverage_narrow_window():
    ds = line_dataset([0.55, 0.9], [0, 0])
    assert coverage(WindowRule(np.array([0.5]), 0.1, 0, 1), ds) == [0]


def test_coverage_everything_excluded():
    ds = line_dataset([0.1, 0.2, 0.3], [0, 1, 0])
    assert coverage(WindowRule(np.array([0.5]), 1.0, 0, 0), ds, excluded={0, 1, 2}) == []


@pytest.mark.parametrize("n, agree, expected", [(4, 4, 0.5), (100, 90, 0.8), (1, 0, -1.0)])
def test_evaluate_rule(n, agree, expected):
    assert evaluate_rule(RuleStats(n, agree)) == pytest.approx(expected, abs=1e-15)


def test_evaluate_rule_empty_window():
    with pytest.raises(ValueError):
        evaluate_rule(RuleStats(0, 0))


def test_best_rule_pure_label_prefers_largest_window():
    ds = line_dataset([0.1, 0.3, 0.45, 0.5, 0.8], [1] * 5)
    found = best_rule([0.5], 0, 1, ds, schedule=SearchSchedule.linear())
    assert found.best_stats == RuleStats(5, 5)
    assert found.best_eval == 1 - math.sqrt(1 / 5)


def test_best_rule_absent_value():
    ds = line_dataset([0.1, 0.3, 0.45, 0.5, 0.8], [0] * 5)
    found = best_rule([0.5], 0, 1, ds, schedule=SearchSchedule.linear())
    assert found.best_eval == -math.sqrt(1 / 5)
    widths = SearchSchedule.linear().half_widths
    assert found.best_half_width == widths[widths >= 0.5 - 0.1][0]  # first width covering all five points


def test_best_rule_tie_goes_to_smaller_window():
    # the width-0.5 and width-1.0 windows cover the same rows
    ds = line_dataset([0.4, 0.6], [1, 1])
    found = best_rule([0.5], 0, 1, ds, schedule=SearchSchedule([0.5, 1.0]))
    assert found.best_half_width == 0.5


def test_best_rule_matches_brute_force_fixed_seed():
    rng = np.random.default_rng(20)
    ds = random_normalized_dataset(rng, 20, 2, 1)
    schedule = SearchSchedule.linear()
    widths = list(schedule)
    X, Y = ds.features.tolist(), ds.labels.tolist()
    for query in rng.uniform(size=(5, 2)).tolist():
        for value in (0, 1):
            expected = oracle.best_window(query, 0, value, X, Y, set(), widths)
            found = best_rule(query, 0, value, ds, schedule=schedule)
            assert (found.best_eval, found.best_half_width) == expected[:2]
            assert tuple(found.best_stats) == expected[2:]


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(2, 40), st.integers(1, 4))
def test_coverage_monotone_and_exclusion(seed, n, d):
    rng = np.random.default_rng(seed)
    ds = random_normalized_dataset(rng, n, d, 2)
    schedule = SearchSchedule.linear(0.05, 1.0, 10)
    q = rng.uniform(size=(1, d))
    dist = chebyshev_distances(q, ds.features)
    counts, pos = window_counts(dist, ds.labels, schedule)
    assert np.all(np.diff(counts[0]) >= 0)
    assert counts[0, -1] == n
    dist_ex = dist.copy()
    dist_ex[0, rng.integers(0, n)] = np.inf
    counts_ex, pos_ex = window_counts(dist_ex, ds.labels, schedule)
    assert np.all(counts_ex <= counts) and np.all(pos_ex <= pos)


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_eval_range(seed):
    rng = np.random.default_rng(seed)
    ds = random_normalized_dataset(rng, int(rng.integers(1, 30)), 2, 1, p_pos=rng.uniform())
    found = best_rule(rng.uniform(size=2), 0, int(rng.integers(0, 2)), ds)
    assert -1 <= found.best_eval < 1
