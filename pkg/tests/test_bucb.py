import math

import numpy as np
import pytest

from batchbo.bucb import BetaSchedule, beta, bucb_batch
from batchbo.gp import DomainBox, Kernel, PosteriorGP, sample_path
from batchbo.bench import lhs_design


def small_model(seed=0, d=2, n=10, family="matern32"):
    kernel = Kernel(family, 1.0, np.full(d, 0.5))
    design = lhs_design(n, d, seed=seed)
    responses = sample_path(kernel, 0.0, design, seed=seed + 17)
    return PosteriorGP(kernel, design, responses)


class TestBetaSchedule:
    def test_displayed_value(self):
        sched = BetaSchedule("bucb1", beta_mult=0.1, delta=0.1, dim=5,
                             batch_size=6)
        expect = 0.2 * math.log(math.pi ** 2 * 5 / 0.6)
        assert beta(sched, 0) == pytest.approx(expect, rel=1e-12)
        assert round(beta(sched, 0), 4) == 0.8819  # 0.8820 at 4 s.f. rounds here

    def test_variants_coincide_at_first_batch(self):
        s1 = BetaSchedule("bucb1", 0.1, 0.1, dim=5, batch_size=6)
        s2 = BetaSchedule("bucb2", 0.1, 0.1, dim=5, batch_size=6)
        assert beta(s1, 0) == beta(s2, 0)

    def test_second_variant_larger_for_later_batches(self):
        s1 = BetaSchedule("bucb1", 0.1, 0.1, dim=5, batch_size=6)
        s2 = BetaSchedule("bucb2", 0.1, 0.1, dim=5, batch_size=6)
        assert beta(s2, 1) > beta(s1, 1)

    def test_monotone_in_batch_index(self):
        for variant in ("bucb1", "bucb2"):
            sched = BetaSchedule(variant, 0.1, 0.1, dim=3, batch_size=4)
            vals = [beta(sched, k) for k in range(6)]
            assert all(b2 >= b1 for b1, b2 in zip(vals, vals[1:]))

    def test_parameter_validation(self):
        with pytest.raises(ValueError):
            BetaSchedule("ucb", 0.1, 0.1, 1, 1)
        with pytest.raises(ValueError):
            BetaSchedule("bucb1", -0.1, 0.1, 1, 1)
        with pytest.raises(ValueError):
            BetaSchedule("bucb1", 0.1, 1.5, 1, 1)
        with pytest.raises(ValueError):
            beta(BetaSchedule("bucb1", 0.1, 0.1, 1, 1), -1)


class TestBucbBatch:
    def test_tiny_beta_tracks_posterior_mean_optimum(self):
        model = small_model(seed=3)
        dom = DomainBox.unit(2)
        sched = BetaSchedule("bucb1", beta_mult=1e-9, delta=0.1, dim=2,
                             batch_size=1)
        pts = bucb_batch(model, 1, sched, 0, dom, seed=2, maximize=True)
        # dense grid argmax of the posterior mean
        gx = np.linspace(0, 1, 101)
        grid = np.array([[a, b] for a in gx for b in gx])
        means = model.mean_many(grid)
        x_star = grid[int(np.argmax(means))]
        assert np.linalg.norm(pts[0] - x_star) <= 2e-2

    def test_points_are_distinct(self):
        model = small_model(seed=4)
        dom = DomainBox.unit(2)
        sched = BetaSchedule("bucb1", 0.1, 0.1, dim=2, batch_size=2)
        pts = bucb_batch(model, 2, sched, 0, dom, seed=5, maximize=True)
        assert np.linalg.norm(pts[0] - pts[1]) > 1e-7 * dom.diagonal()

    def test_deterministic(self):
        model = small_model(seed=6)
        dom = DomainBox.unit(2)
        sched = BetaSchedule("bucb2", 0.1, 0.1, dim=2, batch_size=3)
        p1 = bucb_batch(model, 3, sched, 1, dom, seed=9, maximize=True)
        p2 = bucb_batch(model, 3, sched, 1, dom, seed=9, maximize=True)
        np.testing.assert_array_equal(p1, p2)

    def test_model_untouched(self):
        model = small_model(seed=7)
        design_before = model.design.copy()
        responses_before = model.responses.copy()
        dom = DomainBox.unit(2)
        sched = BetaSchedule("bucb1", 0.1, 0.1, dim=2, batch_size=2)
        bucb_batch(model, 2, sched, 0, dom, seed=1, maximize=True)
        np.testing.assert_array_equal(model.design, design_before)
        np.testing.assert_array_equal(model.responses, responses_before)
        assert model.n == design_before.shape[0]

    def test_selected_points_beat_random_probes(self):
        model = small_model(seed=8)
        dom = DomainBox.unit(2)
        sched = BetaSchedule("bucb1", 0.1, 0.1, dim=2, batch_size=1)
        bval = beta(sched, 0)
        pts = bucb_batch(model, 1, sched, 0, dom, seed=3, maximize=True)
        bound = model.mean_at(pts[0]) + bval * model.sd_at(pts[0])
        rng = np.random.default_rng(123)
        probes = dom.sample(rng, 100)
        probe_best = max(model.mean_at(p) + bval * model.sd_at(p)
                         for p in probes)
        assert bound >= probe_best - 1e-6

    def test_minimize_convention(self):
        # under minimization the bound is mu - beta*s, minimized
        model = small_model(seed=9)
        dom = DomainBox.unit(2)
        sched = BetaSchedule("bucb1", beta_mult=1e-9, delta=0.1, dim=2,
                             batch_size=1)
        pts = bucb_batch(model, 1, sched, 0, dom, seed=2, maximize=False)
        gx = np.linspace(0, 1, 101)
        grid = np.array([[a, b] for a in gx for b in gx])
        means = model.mean_many(grid)
        x_star = grid[int(np.argmin(means))]
        assert np.linalg.norm(pts[0] - x_star) <= 2e-2
