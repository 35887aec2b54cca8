"""Confidence scores, the acceptance rule, and score correlations."""
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ipec import (
    ConfidenceScores,
    DegenerateStatError,
    Thresholds,
    accept,
    correlation_table,
    entropy,
    global_confidence,
    local_confidence,
)

prob_vectors = st.lists(
    st.floats(min_value=1e-6, max_value=1.0), min_size=2, max_size=10
).map(lambda raw: np.asarray(raw) / np.sum(raw))


class TestEntropy:
    def test_one_hot_is_zero(self):
        assert entropy(np.array([1.0, 0.0, 0.0, 0.0, 0.0])) == 0.0

    def test_uniform_is_log_c(self):
        assert entropy(np.full(5, 0.2)) == pytest.approx(math.log(5), rel=1e-14)

    def test_two_point_half(self):
        assert entropy(np.array([0.5, 0.5, 0.0, 0.0, 0.0])) == pytest.approx(
            math.log(2), rel=1e-14
        )


class TestGlobalConfidence:
    def test_uniform_is_zero(self):
        assert global_confidence(np.full(5, 0.2)) == pytest.approx(0.0, abs=1e-14)

    def test_one_hot_is_one(self):
        assert global_confidence(np.array([1.0, 0.0, 0.0])) == 1.0

    def test_skewed_distribution_frozen_value(self):
        # frozen from a 60-digit evaluation of 1 - H/log(5)
        probs = np.array([0.6, 0.2, 0.1, 0.05, 0.05])
        assert global_confidence(probs) == pytest.approx(0.2803607492695732, rel=1e-12)

    def test_never_negative(self):
        # tiny rounding residue around the uniform point must clamp to 0
        probs = np.full(7, 1.0 / 7.0)
        assert global_confidence(probs) >= 0.0

    @given(prob_vectors, st.randoms())
    @settings(max_examples=150, deadline=None)
    def test_permutation_invariant(self, probs, rnd):
        shuffled = probs.copy()
        rnd.shuffle(shuffled)
        assert global_confidence(shuffled) == pytest.approx(
            global_confidence(probs), rel=0, abs=1e-12
        )


class TestLocalConfidence:
    def test_two_way_tie_is_zero(self):
        assert local_confidence(np.array([0.5, 0.5])) == 0.0

    def test_one_hot_is_one(self):
        assert local_confidence(np.array([0.0, 1.0, 0.0])) == 1.0

    def test_skewed_distribution_frozen_value(self):
        # frozen from a 60-digit evaluation of log(0.6/0.2)/log(5)
        probs = np.array([0.6, 0.2, 0.1, 0.05, 0.05])
        assert local_confidence(probs) == pytest.approx(0.6826061944859853, rel=1e-12)

    def test_clamped_to_one(self):
        probs = np.array([0.999999, 1e-6 / 4, 1e-6 / 4, 1e-6 / 4, 1e-6 / 4])
        assert local_confidence(probs / probs.sum()) == 1.0

    def test_depends_only_on_top_two(self):
        a = np.array([0.5, 0.3, 0.1, 0.1])
        b = np.array([0.5, 0.3, 0.15, 0.05])
        assert local_confidence(a) == local_confidence(b)

    def test_two_class_closed_form(self):
        for p_small in (0.05, 0.2, 0.45):
            probs = np.array([1.0 - p_small, p_small])
            expected = min(1.0, math.log((1.0 - p_small) / p_small) / math.log(2))
            assert local_confidence(probs) == pytest.approx(expected, rel=1e-12)

    @given(prob_vectors, st.randoms())
    @settings(max_examples=150, deadline=None)
    def test_permutation_invariant(self, probs, rnd):
        shuffled = probs.copy()
        rnd.shuffle(shuffled)
        assert local_confidence(shuffled) == pytest.approx(
            local_confidence(probs), rel=0, abs=1e-12
        )


class TestAccept:
    def test_both_above(self):
        scores = ConfidenceScores(0.9, 0.9, 0.9)
        assert accept(scores, Thresholds(0.5, 0.5))

    def test_local_failure_rejects(self):
        scores = ConfidenceScores(0.9, 0.3, 0.9)
        assert not accept(scores, Thresholds(0.5, 0.5))

    def test_boundary_is_strict(self):
        scores = ConfidenceScores(0.5, 0.9, 0.9)
        assert not accept(scores, Thresholds(0.5, 0.5))

    def test_thresholds_validated(self):
        with pytest.raises(ValueError):
            Thresholds(-0.1, 0.5)
        with pytest.raises(ValueError):
            Thresholds(0.5, 1.5)

    @given(
        st.floats(min_value=0, max_value=1),
        st.floats(min_value=0, max_value=1),
        st.floats(min_value=0, max_value=1),
        st.floats(min_value=0, max_value=1),
        st.floats(min_value=0, max_value=1),
        st.floats(min_value=0, max_value=1),
    )
    @settings(max_examples=300, deadline=None)
    def test_monotone_in_thresholds(self, d, dp, t1, t2, u1, u2):
        scores = ConfidenceScores(d, dp, max(d, dp, 1e-9))
        low = Thresholds(min(t1, u1), min(t2, u2))
        high = Thresholds(max(t1, u1), max(t2, u2))
        if accept(scores, high):
            assert accept(scores, low)


class TestCorrelationTable:
    def test_proportional_scores_give_r2_one(self):
        scores = [ConfidenceScores(0.1 * i, 0.05 * i, 0.02 * i + 0.5) for i in range(1, 6)]
        table = correlation_table(scores)
        assert table.delta_vs_conf_max == pytest.approx(1.0, rel=1e-9)
        assert table.delta_prime_vs_delta == pytest.approx(1.0, rel=1e-9)

    def test_constant_metric_rejected(self):
        scores = [ConfidenceScores(0.5, 0.1 * i, 0.2 * i + 0.1) for i in range(1, 5)]
        with pytest.raises(DegenerateStatError):
            correlation_table(scores)

    def test_too_few_records_rejected(self):
        scores = [ConfidenceScores(0.5, 0.5, 0.5), ConfidenceScores(0.6, 0.6, 0.6)]
        with pytest.raises(DegenerateStatError):
            correlation_table(scores)

    def test_matches_independent_pearson(self):
        # reference: textbook r^2 with exactly-rounded sums, no numpy stats
        def r_squared_fsum(a, b):
            n = len(a)
            ma, mb = math.fsum(a) / n, math.fsum(b) / n
            cov = math.fsum((x - ma) * (y - mb) for x, y in zip(a, b))
            va = math.fsum((x - ma) ** 2 for x in a)
            vb = math.fsum((y - mb) ** 2 for y in b)
            return cov * cov / (va * vb)

        rng = np.random.default_rng(5)
        base = rng.uniform(0.1, 0.9, 50)
        scores = [
            ConfidenceScores(b, b**2 + 0.01 * rng.standard_normal(), min(1.0, b + 0.05))
            for b in base
        ]
        table = correlation_table(scores)
        for pair, got in (
            (("delta", "conf_max"), table.delta_vs_conf_max),
            (("delta_prime", "conf_max"), table.delta_prime_vs_conf_max),
            (("delta_prime", "delta"), table.delta_prime_vs_delta),
        ):
            a = [getattr(s, pair[0]) for s in scores]
            b = [getattr(s, pair[1]) for s in scores]
            assert got == pytest.approx(r_squared_fsum(a, b), rel=1e-9)

    def test_accepts_objects_with_scores_attribute(self):
        class Holder:
            def __init__(self, s):
                self.scores = s

        scores = [ConfidenceScores(0.1 * i, 0.05 * i, 0.02 * i + 0.5) for i in range(1, 6)]
        direct = correlation_table(scores)
        wrapped = correlation_table(Holder(s) for s in scores)
        assert direct == wrapped
