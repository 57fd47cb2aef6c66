"""Per-label decisions from plausibility pairs: threshold rule and partial abstention."""

import enum
from dataclasses import dataclass
from typing import List

import numpy as np

from .conformal import ConformalRuleModel, PlausibilityPair
from .errors import ConfigError, DataError

#: Integer code used for an abstained label in decision arrays.
ABSTAIN = -1


class Mode(enum.Enum):
    FORCE = "force"
    ABSTAIN = "abstain"


class Outcome(enum.IntEnum):
    ABSTAIN = ABSTAIN
    NEGATIVE = 0
    POSITIVE = 1

    def __str__(self):
        return {ABSTAIN: "abstain", 0: "0", 1: "1"}[int(self)]


@dataclass(frozen=True)
class DecisionConfig:
    """``theta`` scales q0 in the threshold rule; ``abstention_threshold`` caps max(q0, q1).

    ``theta = 0`` is accepted as the degenerate always-positive limit.
    """

    theta: float = 1.0
    abstention_threshold: float = 0.0
    mode: Mode = Mode.FORCE

    def __post_init__(self):
        if not self.theta >= 0:
            raise ConfigError(f"theta must be non-negative, got {self.theta}")
        if not 0.0 <= self.abstention_threshold <= 1.0:
            raise ConfigError(f"abstention_threshold must lie in [0, 1], got {self.abstention_threshold}")
        object.__setattr__(self, "mode", Mode(self.mode))


@dataclass(frozen=True)
class LabelDecision:
    outcome: Outcome
    pair: PlausibilityPair

    @property
    def abstained(self) -> bool:
        return self.outcome is Outcome.ABSTAIN


def decide(pair: PlausibilityPair, config: DecisionConfig) -> LabelDecision:
    """Abstain when both plausibilities are at most the threshold (abstain mode only),
    otherwise predict 1 iff ``q1 >= theta * q0``. Note q0 = q1 = 0 predicts 1."""
    q0, q1 = pair
    if config.mode is Mode.ABSTAIN and max(q0, q1) <= config.abstention_threshold:
        return LabelDecision(Outcome.ABSTAIN, PlausibilityPair(q0, q1))
    outcome = Outcome.POSITIVE if q1 >= config.theta * q0 else Outcome.NEGATIVE
    return LabelDecision(outcome, PlausibilityPair(q0, q1))


def decide_array(pairs: np.ndarray, config: DecisionConfig) -> np.ndarray:
    """Vectorized :func:`decide` over a ``(..., 2)`` array; returns int8 codes with ``ABSTAIN = -1``."""
    q0, q1 = pairs[..., 0], pairs[..., 1]
    codes = (q1 >= config.theta * q0).astype(np.int8)
    if config.mode is Mode.ABSTAIN:
        codes[np.maximum(q0, q1) <= config.abstention_threshold] = ABSTAIN
    return codes


def predict_instance(query, model: ConformalRuleModel, config: DecisionConfig) -> List[LabelDecision]:
    query = np.asarray(query, dtype=np.float64)
    if query.ndim != 1 or query.size != model.train.n_features:
        raise DataError(f"query must have {model.train.n_features} features, got shape {query.shape}")
    pairs = model.plausibilities(query[None, :])[0]
    return [decide(PlausibilityPair(float(q0), float(q1)), config) for q0, q1 in pairs]
