import json

import numpy as np
import pytest

from batchbo.bench import (ExperimentConfig, KernelSpec, config_from_dict,
                           config_to_dict, lhs_design, make_objective,
                           run_experiment, summarize, timing_sweep,
                           traces_to_rows)
from batchbo.gp import Kernel
from batchbo.mvn import CdfAccuracy
from batchbo.qei import qei_grad, qei_grad_fd


TINY = dict(d=2, n_init=6, q=2, n_batches=1, n_replicates=1, m=60,
            kernel=KernelSpec("matern32", 1.0, 0.8), seed=11)


def _strip_wall(trace):
    import dataclasses

    return dataclasses.replace(trace, wall_ms=())


class TestLhs:
    def test_two_point_one_dim_distinct_halves(self):
        pts = lhs_design(2, 1, seed=0)
        assert min(pts[:, 0]) < 0.5 <= max(pts[:, 0]) or \
            min(pts[:, 0]) < 0.5 and max(pts[:, 0]) >= 0.5
        lowers = np.sort(np.floor(pts[:, 0] * 2).astype(int))
        np.testing.assert_array_equal(lowers, [0, 1])

    @pytest.mark.parametrize("n,d,seed", [(7, 2, 1), (12, 3, 2), (20, 5, 3)])
    def test_projection_histogram(self, n, d, seed):
        pts = lhs_design(n, d, seed=seed)
        for col in range(d):
            bins = np.floor(pts[:, col] * n).astype(int)
            np.testing.assert_array_equal(np.sort(bins), np.arange(n))

    def test_exchange_improves_maximin(self):
        def maximin(arr):
            d2 = np.sum((arr[:, None] - arr[None, :]) ** 2, axis=2)
            np.fill_diagonal(d2, np.inf)
            return float(np.min(d2))

        initial = lhs_design(15, 2, seed=4, exchange_iters=0)
        improved = lhs_design(15, 2, seed=4, exchange_iters=500)
        assert maximin(improved) >= maximin(initial)

    def test_requires_two_points(self):
        with pytest.raises(ValueError):
            lhs_design(1, 2, seed=0)


class TestObjective:
    def test_optimum_is_attained_on_grid(self):
        kernel = Kernel("matern32", 1.0, [0.8, 0.8])
        obj, x_star, f_star = make_objective(kernel, 80, 2, seed=3)
        assert obj(x_star) == pytest.approx(f_star, abs=1e-6)

    def test_different_seeds_differ(self):
        kernel = Kernel("matern32", 1.0, [0.8, 0.8])
        obj1, _, _ = make_objective(kernel, 60, 2, seed=1)
        obj2, _, _ = make_objective(kernel, 60, 2, seed=2)
        probes = np.random.default_rng(0).random((10, 2))
        diffs = [abs(obj1(p) - obj2(p)) for p in probes]
        assert max(diffs) > 1e-3

    def test_probe_envelope(self):
        kernel = Kernel("matern32", 1.0, [0.8, 0.8])
        obj, _, f_star = make_objective(kernel, 100, 2, seed=5)
        rng = np.random.default_rng(9)
        sigma = 1.0
        bound = max(abs(f_star), 4.0 * sigma) + 3.0 * sigma
        vals = [obj(p) for p in rng.random((100, 2))]
        assert max(abs(v) for v in vals) <= bound


@pytest.fixture(scope="module")
def tiny_run():
    cfg = ExperimentConfig(**TINY)
    return cfg, *run_experiment(cfg)


class TestRunExperiment:
    def test_trace_shapes_and_monotonicity(self, tiny_run):
        cfg, traces, summary = tiny_run
        assert len(traces) == cfg.n_replicates * len(cfg.strategies)
        for t in traces:
            assert not t.failed
            assert len(t.best_values) == cfg.n_batches + 1
            bv = np.array(t.best_values)
            assert np.all(np.diff(bv) >= -1e-12)
            rg = np.array(t.regrets)
            assert np.all(rg >= 0.0)
            assert np.all(np.diff(rg) <= 1e-12)

    def test_csv_row_arithmetic(self, tiny_run):
        cfg, traces, _ = tiny_run
        rows = traces_to_rows(traces)
        assert len(rows) == cfg.n_replicates * len(cfg.strategies) * (cfg.n_batches + 1)

    def test_first_batch_table_present(self, tiny_run):
        cfg, _, summary = tiny_run
        names = {row["strategy"] for row in summary["first_batch"]}
        assert names == set(cfg.strategies)
        for row in summary["first_batch"]:
            assert np.isfinite(row["mean_qei"])
            assert row["mean_realized_improvement"] >= 0.0

    def test_zero_batches_identical_across_strategies(self):
        cfg = ExperimentConfig(**{**TINY, "n_batches": 0})
        traces, _ = run_experiment(cfg)
        regs = {t.strategy: t.regrets for t in traces}
        vals = list(regs.values())
        assert all(v == vals[0] for v in vals)

    def test_strategy_isolation(self):
        base = {**TINY, "strategies": ("bucb1",)}
        both = {**TINY, "strategies": ("bucb1", "bucb2")}
        t_single, _ = run_experiment(ExperimentConfig(**base))
        t_both, _ = run_experiment(ExperimentConfig(**both))
        a = [t for t in t_single if t.strategy == "bucb1"][0]
        b = [t for t in t_both if t.strategy == "bucb1"][0]
        assert _strip_wall(a) == _strip_wall(b)

    def test_determinism(self):
        # everything except measured wall time is a pure function of the config
        cfg = ExperimentConfig(**{**TINY, "strategies": ("bucb1", "bucb2")})
        t1, s1 = run_experiment(cfg)
        t2, s2 = run_experiment(cfg)
        assert [_strip_wall(t) for t in t1] == [_strip_wall(t) for t in t2]
        assert json.dumps(s1, sort_keys=True) == json.dumps(s2, sort_keys=True)

    def test_config_roundtrip(self):
        cfg = ExperimentConfig(**TINY)
        again = config_from_dict(json.loads(json.dumps(config_to_dict(cfg))))
        assert config_to_dict(again) == config_to_dict(cfg)

    def test_paper_scale_preset(self):
        cfg = config_from_dict({"preset": "paper-scale"})
        assert (cfg.d, cfg.n_init, cfg.q, cfg.n_batches, cfg.n_replicates,
                cfg.m) == (5, 50, 6, 10, 50, 2000)


class TestTimingSweep:
    def test_counts_and_ratio_columns(self):
        rows = timing_sweep([2], [2], repeats=2, seed=0, cdf_tol=1e-4)
        row = rows[0]
        # q = 2 gradient: 2 calls at dim 2, 12 at dim 1, 10 at dim 0
        assert row["cdf_calls_analytic"] == 24
        # fd: 2*q*d value evaluations, each q at dim q and q^2 at dim q-1
        assert row["cdf_calls_fd"] == 2 * 2 * 2 * (2 + 4)
        assert row["ratio"] == pytest.approx(row["t_fd_ms"] / row["t_analytic_ms"],
                                             rel=1e-9)

    def test_repeat_invariance_of_counts(self):
        r1 = timing_sweep([2], [2], repeats=1, seed=3, cdf_tol=1e-4)[0]
        r2 = timing_sweep([2], [2], repeats=3, seed=3, cdf_tol=1e-4)[0]
        assert r1["cdf_calls_analytic"] == r2["cdf_calls_analytic"]
        assert r1["cdf_calls_fd"] == r2["cdf_calls_fd"]

    def test_q1_gradients_agree(self):
        # analytic and finite differences coincide in the one-point case
        from _oracles import random_instance

        model, batch, t = random_instance(90, q=1)
        acc = CdfAccuracy(tolerance=1e-10)
        g = qei_grad(model, batch, t, acc).gradient
        fd = qei_grad_fd(model, batch, t, acc, step=1e-6)
        np.testing.assert_allclose(g, fd, rtol=1e-6, atol=1e-6)
