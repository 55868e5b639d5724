import math

import numpy as np
import pytest

from sast.baselines import (BaselineState, GammaSequence, fixed_threshold_step, lond_level,
                            lond_step, lordpp_level, lordpp_step, run_lond, run_lordpp)

GAMMA1 = 6 / math.pi ** 2


def lordpp_reference(ps, alpha, w0):
    """LORD++ levels written straight from the definition."""
    g = lambda j: 6 / (math.pi ** 2 * j * j)
    taus, out = [], []
    for t, p in enumerate(ps, start=1):
        level = g(t) * w0
        if taus:
            level += (alpha - w0) * g(t - taus[0])
            level += alpha * sum(g(t - tj) for tj in taus[1:])
        rej = p <= level
        if rej:
            taus.append(t)
        out.append(rej)
    return out


class TestGammaSequence:
    def test_default_first_term(self):
        assert GammaSequence()(1) == pytest.approx(GAMMA1)

    @pytest.mark.parametrize("kind", ["inverse_square", "log"])
    def test_positive_nonincreasing_summable(self, kind):
        g = GammaSequence(kind).array(200_000)
        assert np.all(g > 0)
        assert np.all(np.diff(g[1:]) <= 0)
        assert g.sum() <= 1.0

    def test_unknown(self):
        with pytest.raises(ValueError):
            GammaSequence("harmonic")


class TestLOND:
    def test_first_step(self):
        s = BaselineState()
        assert lond_level(s, 1, 0.05, GammaSequence()) == pytest.approx(0.030396, abs=1e-6)
        assert lond_step(s, 0.01, 0.05)

    def test_p_one(self):
        assert not lond_step(BaselineState(), 1.0, 0.05)

    def test_scales_with_discoveries(self):
        g = GammaSequence()
        s = BaselineState(t=20, rejection_times=list(range(1, 10)))
        assert lond_level(s, 21, 0.05, g) == pytest.approx(10 * lond_level(BaselineState(), 21, 0.05, g))

    def test_nondecreasing_in_count(self):
        g = GammaSequence()
        levels = [lond_level(BaselineState(rejection_times=list(range(k))), 50, 0.05, g)
                  for k in range(10)]
        assert np.all(np.diff(levels) >= 0)


class TestLORDpp:
    def test_first_step(self):
        s = BaselineState()
        assert lordpp_level(s, 1, 0.05, GammaSequence(), 0.025) == pytest.approx(0.015198, abs=1e-6)
        assert lordpp_step(s, 0.01, 0.05)

    def test_levels_decay_without_discoveries(self):
        s = BaselineState()
        for _ in range(999):
            lordpp_step(s, 1.0, 0.05)
        assert lordpp_level(s, 1000, 0.05, GammaSequence(), 0.025) == pytest.approx(
            0.025 * 6 / (math.pi ** 2 * 1000 ** 2))

    def test_three_step_trace(self):
        ps = [0.001, 0.5, 0.02]
        assert run_lordpp(ps, 0.05).tolist() == lordpp_reference(ps, 0.05, 0.025)

    def test_random_trace(self):
        rng = np.random.default_rng(0)
        ps = np.where(rng.random(2000) < 0.1, rng.random(2000) * 1e-3, rng.random(2000))
        assert run_lordpp(ps, 0.05).tolist() == lordpp_reference(ps.tolist(), 0.05, 0.025)

    def test_wealth_never_negative(self):
        rng = np.random.default_rng(1)
        s = BaselineState()
        for p in np.where(rng.random(3000) < 0.05, 1e-5, rng.random(3000)):
            lordpp_step(s, float(p), 0.05)
            assert s.wealth >= -1e-15
            assert lordpp_level(s, s.t + 1, 0.05, GammaSequence(), 0.025) > 0

    def test_bad_w0(self):
        with pytest.raises(ValueError):
            lordpp_step(BaselineState(), 0.5, 0.05, w0=0.1)


class TestFixed:
    def test_cases(self):
        assert fixed_threshold_step(0.00005, 1e-4)
        assert fixed_threshold_step(0.0001, 1e-4)
        assert not fixed_threshold_step(0.5, 1e-4)


@pytest.mark.slow
@pytest.mark.parametrize("rule", [run_lond, run_lordpp])
def test_all_null_fdr(rule):
    rng = np.random.default_rng(2)
    fdp = []
    for _ in range(200):
        dec = rule(rng.random(5000), 0.05)
        fdp.append(1.0 if dec.any() else 0.0)  # every rejection is false
    fdp = np.array(fdp)
    assert fdp.mean() <= 0.05 + 2 * fdp.std(ddof=1) / np.sqrt(200)
