import numpy as np
import pytest

from sast.estimators import TauPolicy
from sast.simulation import (Block, ConfigError, Constant, Custom, EvalCurve, Linear, SimConfig,
                             Sine, evaluate, generate_stream, offline_comparison, parse_method,
                             pi_pattern_value, rep_seed, run_method, run_replications,
                             setting_pattern)


class TestPatterns:
    @pytest.mark.parametrize("t,want", [(1100, 0.6), (4100, 0.8), (500, 0.01), (1, 0.01),
                                        (1000, 0.01), (1001, 0.6), (1200, 0.6), (1201, 0.01)])
    def test_setting1(self, t, want):
        assert pi_pattern_value(setting_pattern(1), t, 5000) == want

    def test_sine_peak(self):
        assert pi_pattern_value(Sine(), 1250, 5000) == pytest.approx(0.5)

    def test_linear_endpoints(self):
        v = Linear(0.0, 0.5).values(5000)
        assert v[0] == 0.0 and v[-1] == pytest.approx(0.5)
        assert np.all(np.diff(v) > 0)

    def test_overlap(self):
        with pytest.raises(ConfigError):
            Block(((0, 10, 0.5), (5, 20, 0.3)))

    def test_adjacent_blocks_are_fine(self):
        assert Block(((0, 10, 0.5), (10, 20, 0.3))).values(20)[[9, 10]].tolist() == [0.5, 0.3]

    def test_out_of_range(self):
        with pytest.raises(ConfigError):
            SimConfig(m=10, pattern=Custom(lambda t: 1.5), reps=1, checkpoints=[10])

    def test_unknown_setting(self):
        with pytest.raises(ConfigError):
            setting_pattern(7)


class TestStreams:
    def test_all_null(self):
        s = generate_stream(SimConfig(m=1000, pattern=Constant(0.0), checkpoints=[1000]), 1)
        assert not s.theta.any() and s.x.size == 1500

    def test_all_signal(self):
        s = generate_stream(SimConfig(m=1000, pattern=Constant(1.0), checkpoints=[1000]), 1)
        assert s.theta.all()

    def test_signal_means(self):
        s = generate_stream(SimConfig(m=100_000, mu=3.0, pattern=Constant(0.3), checkpoints=[10]), 3)
        th = s.theta.astype(bool)
        assert abs(th.mean() - 0.3) < 4 * np.sqrt(0.3 * 0.7 / th.size)
        assert abs(s.x[th].mean() - 3.0) < 4 / np.sqrt(th.sum())
        assert abs(s.x[~th].mean()) < 4 / np.sqrt((~th).sum())

    def test_burn_in_uses_first_value(self):
        s = generate_stream(SimConfig(m=2000, pattern=Linear(0.2, 0.5), checkpoints=[2000]), 0)
        assert np.all(s.pi[:500] == 0.2)

    def test_deterministic(self):
        cfg = SimConfig(m=500, checkpoints=[500])
        a, b = generate_stream(cfg, rep_seed(5, 2)), generate_stream(cfg, rep_seed(5, 2))
        assert np.array_equal(a.x, b.x)
        assert not np.array_equal(a.x, generate_stream(cfg, rep_seed(5, 3)).x)


class TestEvaluate:
    def test_example(self):
        fdp, mdp = evaluate([1, 1, 0, 0], [1, 0, 1, 0], [4])
        assert fdp.tolist() == [0.5] and mdp.tolist() == [0.5]

    def test_prefixes(self):
        fdp, mdp = evaluate([1, 1, 0, 0], [1, 0, 1, 0], [1, 2])
        assert fdp.tolist() == [0.0, 0.5] and mdp.tolist() == [0.0, 0.0]

    def test_empty_conventions(self):
        fdp, mdp = evaluate([0, 0], [0, 0], [2])
        assert fdp.tolist() == [0.0] and mdp.tolist() == [0.0]

    def test_length_mismatch(self):
        with pytest.raises(ValueError):
            evaluate([1, 0], [1, 0, 1], [2])

    def test_curve_stderr(self):
        c = EvalCurve.from_reps([10], np.array([[0.0], [1.0]]), np.array([[0.5], [0.5]]))
        assert c.fdr[0] == 0.5 and c.stderr_fdr[0] == pytest.approx(0.5)
        assert c.at(10)["stderr_mdr"] == 0.0


class TestRunner:
    cfg = SimConfig(m=1500, mu=3.0, pattern=Constant(0.1), reps=3, seed=11, checkpoints=[1000, 1500])

    def test_unknown_method(self):
        with pytest.raises(ConfigError):
            parse_method("storey")
        with pytest.raises(ConfigError):
            run_replications(self.cfg, ["sast-or", "bonferroni"])

    def test_parse_fixed(self):
        assert parse_method("fixed:0.01") == ("fixed", 0.01)
        assert parse_method("fixed") == ("fixed", 1e-4)

    def test_fixed_one_rejects_everything(self):
        cfg = SimConfig(m=2000, pattern=Constant(0.2), reps=1, checkpoints=[2000])
        stream = generate_stream(cfg, rep_seed(0, 0))
        res = run_replications(cfg, ["fixed:1.0"])["fixed:1.0"]
        theta = stream.theta[stream.main]
        assert res.fdr[0] == pytest.approx(1 - theta.mean())
        assert res.mdr[0] == 0.0

    def test_deterministic_across_workers(self):
        methods = ["sast-or", "sast-dd", "lordpp"]
        a = run_replications(self.cfg, methods)
        b = run_replications(self.cfg, methods)
        c = run_replications(self.cfg, methods, workers=2)
        for m in methods:
            for other in (b, c):
                assert np.array_equal(a[m].fdp_reps, other[m].fdp_reps)
                assert np.array_equal(a[m].mdp_reps, other[m].mdp_reps)

    def test_methods_share_the_stream(self):
        stream = generate_stream(self.cfg, rep_seed(11, 0))
        cache = {}
        run_method("sast-or", stream, self.cfg, cache)
        assert set(cache) == {"or"}
        dec = run_method("sast-or-nob", stream, self.cfg, cache)
        assert dec.size == 1500

    def test_fixed_tau(self):
        cfg = SimConfig(m=1000, reps=1, checkpoints=[1000], tau=TauPolicy("fixed", 0.5))
        assert run_replications(cfg, ["sast-dd"])["sast-dd"].fdr.shape == (1,)


def test_offline_comparison_shapes():
    out = offline_comparison(m=5000, reps=2, seed=1)
    assert set(out) == {"bh", "sabha", "gap", "clfdr"}
    for fdp, power in out.values():
        assert fdp.shape == power.shape == (2,)
        assert np.all((0 <= fdp) & (fdp <= 1) & (0 <= power) & (power <= 1))
