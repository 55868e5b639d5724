import itertools

import numpy as np
import pytest

from sast.model import MixtureParams
from sast.offline import (OracleThresholdUndefined, bh, clfdr_stepwise, gap_weights,
                          oracle_threshold_from_draws, oracle_threshold_gamma, q_or,
                          sabha_weights, weighted_bh, _mixture_clfdrs)


def brute_force_bh(p, alpha):
    """Largest rejection set of the form {i: p_i <= p_(k)} with p_(k) <= k alpha / m."""
    m = len(p)
    best = set()
    for k in range(1, m + 1):
        cut = sorted(p)[k - 1]
        if cut <= k * alpha / m:
            cand = {i for i, v in enumerate(p) if v <= cut}
            if len(cand) > len(best):
                best = cand
    return best


def brute_force_stepwise(c, alpha):
    """Largest k such that some k-subset has mean <= alpha; the k smallest is optimal."""
    best_k = 0
    for k in range(1, len(c) + 1):
        if min(sum(s) / k for s in itertools.combinations(c, k)) <= alpha + 1e-15:
            best_k = k
    return best_k


class TestBH:
    def test_example(self):
        assert bh([0.001, 0.02, 0.04, 0.5], 0.05) == {0, 1}

    def test_all_ones(self):
        assert bh([1.0] * 5, 0.05) == set()

    def test_single(self):
        assert bh([0.04], 0.05) == {0}

    def test_empty(self):
        assert bh([], 0.05) == set()

    def test_invalid_p(self):
        with pytest.raises(ValueError):
            bh([1.2], 0.05)

    def test_matches_brute_force(self):
        rng = np.random.default_rng(0)
        for _ in range(1000):
            m = int(rng.integers(1, 7))
            p = (rng.integers(0, 101, size=m) / 100).tolist()
            alpha = float(rng.choice([0.05, 0.1, 0.2, 0.5]))
            assert bh(p, alpha) == brute_force_bh(p, alpha)


class TestWeighted:
    def test_unit_weights(self):
        p = [0.001, 0.02, 0.04, 0.5]
        assert weighted_bh(p, [1.0] * 4, 0.05) == bh(p, 0.05)

    def test_up_weight(self):
        assert weighted_bh([0.08], [2.0], 0.05) == {0}

    def test_down_weight(self):
        assert weighted_bh([0.01], [0.1], 0.05) == set()

    def test_nonpositive_weight(self):
        with pytest.raises(ValueError):
            weighted_bh([0.01, 0.2], [1.0, 0.0], 0.05)

    def test_weight_formulas(self):
        np.testing.assert_allclose(sabha_weights([0.5, 0.01]), [2.0, 1 / 0.99])
        np.testing.assert_allclose(gap_weights([0.5, 0.01]), [1.0, 0.01 / 0.99])


class TestStepwise:
    def test_example(self):
        res = clfdr_stepwise([0.20, 0.01, 0.03], 0.05)
        assert res.k == 2 and res.threshold == 0.03 and res.rejections == {1, 2}

    def test_nothing(self):
        res = clfdr_stepwise([0.3, 0.2], 0.05)
        assert res.k == 0 and res.threshold is None and not res.rejects_any

    def test_boundary(self):
        assert clfdr_stepwise([0.05], 0.05).k == 1

    def test_matches_brute_force(self):
        rng = np.random.default_rng(1)
        for _ in range(1000):
            n = int(rng.integers(1, 9))
            c = np.round(rng.random(n) ** 2, 3).tolist()
            res = clfdr_stepwise(c, 0.05)
            assert res.k == brute_force_stepwise(c, 0.05)
            assert len(res.rejections) == res.k
            if res.k:
                assert np.mean([c[i] for i in res.rejections]) <= 0.05 + 1e-12

    def test_thresholding_form(self):
        rng = np.random.default_rng(2)
        for _ in range(500):
            c = (rng.random(int(rng.integers(1, 13))) ** 3).tolist()  # ties have probability zero
            res = clfdr_stepwise(c, 0.05)
            if res.k:
                assert res.rejections == {i for i, v in enumerate(c) if v <= res.threshold}

    def test_ties_at_cut_keep_average(self):
        # the second copy of 0.08 would push the average above alpha
        res = clfdr_stepwise([0.08, 0.0, 0.08], 0.05)
        assert res.k == 2 and res.rejections == {0, 1}


class TestOracleThreshold:
    params = MixtureParams.constant(0.5, 3.0)

    def test_no_signal(self):
        with pytest.raises(OracleThresholdUndefined):
            oracle_threshold_gamma(MixtureParams.constant(0.0, 3.0), 0.05, 10_000, seed=0)

    def test_seed_agreement(self):
        # 4e6 draws give a per-run sd of about 2.5e-4
        a = oracle_threshold_gamma(self.params, 0.05, 4_000_000, seed=1)
        b = oracle_threshold_gamma(self.params, 0.05, 4_000_000, seed=2)
        assert abs(a - b) <= 2e-3

    def test_monotone_in_alpha(self):
        a = oracle_threshold_gamma(self.params, 0.05, 200_000, seed=3)
        b = oracle_threshold_gamma(self.params, 0.10, 200_000, seed=3)
        assert b >= a

    def test_bisection_matches_sorted_scan(self):
        c = _mixture_clfdrs(self.params, 50_000, np.random.default_rng(4))
        s = np.sort(c)
        k = int(np.nonzero(np.cumsum(s - 0.05) <= 0)[0][-1]) + 1
        gamma = oracle_threshold_from_draws(c, 0.05, tol=1e-6)
        # the largest admissible gamma lies between the k-th and (k+1)-th order statistics
        assert s[k - 1] - 1e-6 <= gamma <= s[k] + 1e-6
        assert q_or(c, gamma) <= 0.05

    def test_q_or_monotone(self):
        c = _mixture_clfdrs(self.params, 100_000, np.random.default_rng(5))
        q = [q_or(c, g) for g in np.linspace(0.001, 1.0, 200)]
        assert np.all(np.diff(q) >= -1e-15)
