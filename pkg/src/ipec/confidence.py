"""Confidence scoring and the dual-filter acceptance rule.

Two complementary scores gate which query samples may enter the auxiliary
memory: a global score (one minus normalized entropy of the predictive
distribution) and a local score (the log-ratio of the top-1 to top-2
probabilities, normalized by log C and clamped to [0, 1]). Both use natural
logarithms; the normalizations make the base irrelevant.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable

import numpy as np

from .errors import DegenerateStatError


@dataclass(frozen=True)
class ConfidenceScores:
    delta: float        # global: 1 - H/log C, in [0, 1]
    delta_prime: float  # local: log(l_max/l_second)/log C, clamped to [0, 1]
    conf_max: float     # max probability, in (0, 1]


@dataclass(frozen=True)
class Thresholds:
    tau: float
    tau_prime: float

    def __post_init__(self) -> None:
        for name, value in (("tau", self.tau), ("tau_prime", self.tau_prime)):
            if not (0.0 <= value <= 1.0):
                raise ValueError(f"{name} must be in [0, 1], got {value}")


def entropy(probs: np.ndarray) -> float:
    """Shannon entropy in nats, with 0*log(0) defined as 0."""
    p = np.asarray(probs, dtype=np.float64)
    mask = p > 0.0
    return float(-(p[mask] * np.log(p[mask])).sum())


def global_confidence(probs: np.ndarray) -> float:
    """1 - H/log(C); 0 for uniform, 1 for one-hot. Tiny negative rounding
    residue is clamped to 0."""
    p = np.asarray(probs, dtype=np.float64)
    c = p.shape[0]
    if c < 2:
        raise ValueError("global confidence needs at least 2 classes")
    value = 1.0 - entropy(p) / math.log(c)
    return max(value, 0.0)


def local_confidence(probs: np.ndarray) -> float:
    """Normalized top-1/top-2 log-ratio; 1 when the runner-up has zero mass."""
    p = np.asarray(probs, dtype=np.float64)
    c = p.shape[0]
    if c < 2:
        raise ValueError("local confidence needs at least 2 classes")
    top = int(np.argmax(p))
    l_max = float(p[top])
    rest = np.delete(p, top)
    l_second = float(rest.max())
    if l_second <= 0.0:
        return 1.0
    ratio_log = math.log(l_max) - math.log(l_second)
    return min(1.0, ratio_log / math.log(c))


def scores_from_probs(probs: np.ndarray) -> ConfidenceScores:
    return ConfidenceScores(
        delta=global_confidence(probs),
        delta_prime=local_confidence(probs),
        conf_max=float(np.max(probs)),
    )


def accept(scores: ConfidenceScores, thresholds: Thresholds) -> bool:
    """True iff both scores strictly exceed their thresholds."""
    return scores.delta > thresholds.tau and scores.delta_prime > thresholds.tau_prime


@dataclass(frozen=True)
class CorrelationTable:
    delta_vs_conf_max: float
    delta_prime_vs_conf_max: float
    delta_prime_vs_delta: float


def _r_squared(a: np.ndarray, b: np.ndarray) -> float:
    return float(np.corrcoef(a, b)[0, 1] ** 2)


def correlation_table(scores: Iterable) -> CorrelationTable:
    """Pairwise squared Pearson correlations of the three score metrics.

    Accepts ConfidenceScores directly or any records carrying a ``scores``
    attribute (e.g. prediction records).
    """
    items = [getattr(s, "scores", s) for s in scores]
    if len(items) < 3:
        raise DegenerateStatError(f"need at least 3 scored samples, got {len(items)}")
    delta = np.asarray([s.delta for s in items])
    delta_prime = np.asarray([s.delta_prime for s in items])
    conf_max = np.asarray([s.conf_max for s in items])
    for name, values in (
        ("delta", delta),
        ("delta_prime", delta_prime),
        ("conf_max", conf_max),
    ):
        if float(values.std()) == 0.0:
            raise DegenerateStatError(f"metric {name} is constant; correlation undefined")
    return CorrelationTable(
        delta_vs_conf_max=_r_squared(delta, conf_max),
        delta_prime_vs_conf_max=_r_squared(delta_prime, conf_max),
        delta_prime_vs_delta=_r_squared(delta_prime, delta),
    )
