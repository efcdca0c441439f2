import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.stats import chisquare

from cbopt.oracle import CategoricalScheme, default_scheme
from cbopt.problems import IsotropicNormal, QuadraticProblem, Uniform, ground_truth, h1, h2, newsvendor
from cbopt.sampling import RadialExponential, band_family
from cbopt.solvers import (
    ConstOverSqrtT,
    InvSqrtT,
    MoreauParams,
    RandomIndex,
    RunRecord,
    SmoothConst,
    SmoothDecay,
    SolverConfig,
    Stage,
    StagePlan,
    StageSmooth,
    Strong,
    StrongSmooth,
    moreau_prox,
    moreau_stationarity,
    project_box,
    project_interval,
    qp_extreme_eigenvalues,
    random_index_output,
    run_cba,
    run_cba_c,
    run_cba_qp,
    run_mcba,
    run_mcba_qp,
    run_sgd,
    run_sgd_qp,
    step_size,
)

U = Uniform(50.0, 150.0)


def cfg(x1=70.0, T=200, schedule=None, **kw):
    return SolverConfig(x1=x1, T=T, schedule=schedule or InvSqrtT(), bounds=(50.0, 150.0), **kw)


class TestStepSizes:
    def test_examples(self):
        assert step_size(InvSqrtT(), 4) == 0.5
        assert step_size(Strong(0.5), 10) == 0.2
        assert step_size(StrongSmooth(1.0, 3.0), 2) == 0.2

    def test_closed_forms(self):
        assert step_size(ConstOverSqrtT(100), 7) == 0.1
        assert step_size(SmoothConst(2.0, 64), 3) == 0.1
        assert step_size(SmoothDecay(1.0), 9) == 0.25
        assert step_size(Stage(2, 0.5), 1) == 0.25
        assert step_size(StageSmooth(1, 1.0, 4.0), 5) == 0.125

    def test_strong_needs_positive_mu(self):
        with pytest.raises(ValueError):
            Strong(0.0)
        with pytest.raises(ValueError):
            StrongSmooth(0.0, 1.0)

    def test_t_from_one(self):
        with pytest.raises(ValueError):
            step_size(InvSqrtT(), 0)

    @given(t=st.integers(1, 10**6))
    def test_positive(self, t):
        for s in (InvSqrtT(), Strong(0.5), StrongSmooth(1.0, 2.0), Stage(3, 0.5), SmoothDecay(1.0)):
            assert s(t) > 0


class TestStagePlan:
    def test_variant_a(self):
        plan = StagePlan(3, "A", 0.5)
        assert [T for T, _ in plan.stages] == [16, 32, 64]
        assert plan.total == 112

    def test_variant_b(self):
        assert StagePlan(2, "B", 1.0, 4.0).total == 56

    def test_stage_schedules(self):
        plan = StagePlan(2, "B", 1.0, 4.0)
        assert [s for _, s in plan.stages] == [StageSmooth(1, 1.0, 4.0), StageSmooth(2, 1.0, 4.0)]

    @given(K=st.integers(1, 12))
    def test_totals_closed_form(self, K):
        assert StagePlan(K, "A", 1.0).total == sum(2 ** (k + 3) for k in range(1, K + 1))
        assert StagePlan(K, "B", 1.0).total == sum(2 ** (k + 3) + 4 for k in range(1, K + 1))

    def test_covering(self):
        plan = StagePlan.covering(500, "A", 0.5)
        assert plan.total >= 500 and StagePlan(plan.K - 1, "A", 0.5).total < 500

    def test_invalid(self):
        for args in ((0, "A", 1.0), (1, "C", 1.0), (1, "A", 0.0)):
            with pytest.raises(ValueError):
                StagePlan(*args)


class TestProjection:
    def test_interval(self):
        assert project_interval(200.0, 50.0, 150.0) == 150.0
        assert project_interval(100.0, 50.0, 150.0) == 100.0
        assert project_interval(-5.0, 50.0, 150.0) == 50.0

    def test_box(self):
        box = (np.full(2, 50.0), np.full(2, 150.0))
        np.testing.assert_array_equal(project_box(np.array([40.0, 160.0]), box), [50.0, 150.0])


class TestCba:
    def test_single_iteration_returns_start(self, rng):
        rec = run_cba(cfg(T=1), U, h1(), band_family("uniform", h1(), U), rng=rng)
        assert rec.output == 70.0

    def test_concentrated_law(self):
        law = Uniform(99.9, 100.1)
        obj = h1()
        rec = run_cba(cfg(T=5000, schedule=Strong(0.5)), law, obj, band_family("uniform", obj, law), rng=np.random.default_rng(7))
        assert abs(rec.output - 100.0) <= 0.5

    def test_averages_and_feasibility(self, rng):
        obj = h2()
        rec = run_cba(cfg(T=500, schedule=Strong(0.5)), U, obj, band_family("uniform", obj, U), ground_truth(obj, U), rng)
        np.testing.assert_allclose(rec.averages, np.cumsum(rec.iterates) / np.arange(1, 501), rtol=0, atol=1e-12)
        assert np.all((rec.iterates >= 50.0) & (rec.iterates <= 150.0))
        assert rec.gaps.shape == (500,) and np.all(rec.gaps >= -1e-12)

    def test_comparison_count(self, rng):
        rec = run_cba(cfg(T=300), U, h1(), band_family("uniform", h1(), U), rng=rng)
        assert rec.comparisons == 600

    def test_minibatch_comparison_count(self, rng):
        rec = run_cba(cfg(T=100, batch=5), U, h1(), band_family("uniform", h1(), U), rng=rng)
        assert rec.comparisons == 600

    def test_deterministic(self):
        fam = band_family("exp:0.0625", h1(), U)
        a = run_cba(cfg(T=300), U, h1(), fam, rng=np.random.default_rng(3))
        b = run_cba(cfg(T=300), U, h1(), fam, rng=np.random.default_rng(3))
        np.testing.assert_array_equal(a.iterates, b.iterates)

    def test_seed_in_config(self):
        fam = band_family("uniform", h1(), U)
        a = run_cba(cfg(T=50, seed=11), U, h1(), fam)
        b = run_cba(cfg(T=50, seed=11), U, h1(), fam)
        np.testing.assert_array_equal(a.iterates, b.iterates)

    def test_infeasible_start_rejected(self):
        with pytest.raises(ValueError):
            cfg(x1=20.0)

    def test_newsvendor_converges_to_quantile(self):
        nv = newsvendor(1.0, 2.0)
        rec = run_cba(cfg(T=20_000, schedule=InvSqrtT()), U, nv, band_family("uniform", nv, U), rng=np.random.default_rng(2))
        assert abs(rec.output - ground_truth(nv, U).xstar) < 3.0


class TestMcba:
    def test_single_stage_equals_cba(self):
        fam = band_family("uniform", h1(), U)
        plan = StagePlan(1, "A", 0.5)
        m = run_mcba(70.0, plan, U, h1(), fam, rng=np.random.default_rng(5))
        T1, sched = plan.stages[0]
        c = run_cba(cfg(T=T1, schedule=sched), U, h1(), fam, rng=np.random.default_rng(5))
        np.testing.assert_array_equal(m.iterates, c.iterates)
        assert m.output == c.output

    def test_warm_starts(self, rng):
        fam = band_family("uniform", h1(), U)
        rec = run_mcba(70.0, StagePlan(3, "A", 0.5), U, h1(), fam, rng=rng)
        assert rec.T == 112
        assert rec.iterates[16] == rec.stage_outputs[0]
        assert rec.iterates[48] == rec.stage_outputs[1]
        assert rec.comparisons == 224

    def test_horizon_truncates(self, rng):
        fam = band_family("uniform", h1(), U)
        rec = run_mcba(70.0, StagePlan.covering(500, "A", 0.5), U, h1(), fam, ground_truth(h1(), U), rng, horizon=500)
        assert rec.T == 500 and rec.gaps.shape == (500,)


class TestCbaCategorical:
    def test_single_band_matches_binary(self):
        obj = h2()
        a = run_cba_c(cfg(T=300), U, obj, default_scheme(1, lam=0.0625), rng=np.random.default_rng(9))
        b = run_cba(cfg(T=300), U, obj, band_family("exp:0.0625", obj, U), rng=np.random.default_rng(9))
        np.testing.assert_array_equal(a.iterates, b.iterates)

    def test_newsvendor_matches_binary(self):
        nv = newsvendor(1.0, 2.0)
        a = run_cba_c(cfg(T=300), U, nv, default_scheme(5), rng=np.random.default_rng(4))
        b = run_cba(cfg(T=300), U, nv, band_family("uniform", nv, U), rng=np.random.default_rng(4))
        np.testing.assert_array_equal(a.iterates, b.iterates)

    def test_custom_thresholds(self, rng):
        scheme = CategoricalScheme((0.0, 1.0, 10.0, math.inf))
        rec = run_cba_c(cfg(T=200), U, h1(), scheme, ground_truth(h1(), U), rng)
        assert rec.comparisons == 400


class TestSgd:
    def test_single_step(self):
        class Fixed(Uniform):
            def sample(self, rng):
                return 90.0

        rec = run_sgd(SolverConfig(x1=100.0, T=2, schedule=ConstOverSqrtT(100), bounds=(50.0, 150.0)), Fixed(50.0, 150.0), h1())
        assert rec.iterates[1] == pytest.approx(98.0)

    def test_projection(self):
        class Far(Uniform):
            def sample(self, rng):
                return 10.0

        rec = run_sgd(SolverConfig(x1=60.0, T=3, schedule=InvSqrtT(), bounds=(50.0, 150.0)), Far(0.0, 200.0), h1())
        assert rec.iterates[1] == 50.0

    def test_zero_comparisons(self, rng):
        assert run_sgd(cfg(T=10), U, h1(), rng=rng).comparisons == 0


class TestQp:
    def setup_method(self):
        d = 3
        g = np.random.default_rng(1).standard_normal((d, d))
        Q = g.T @ g / d + np.eye(d)
        self.prob = QuadraticProblem(Q, IsotropicNormal((100.0,) * d, 50.0), (np.full(d, 50.0), np.full(d, 150.0)))
        self.mu, self.L = qp_extreme_eigenvalues(Q)

    def test_eigenvalues(self):
        assert qp_extreme_eigenvalues(np.diag([1.0, 4.0])) == (1.0, 4.0)
        with pytest.raises(ValueError):
            qp_extreme_eigenvalues(np.diag([1.0, -4.0]))

    def test_cba_qp_feasible_and_counted(self, rng):
        c = SolverConfig(x1=np.full(3, 60.0), T=400, schedule=StrongSmooth(self.mu, self.L), bounds=self.prob.box)
        rec = run_cba_qp(c, self.prob, RadialExponential(0.0625), self.prob.ground_truth(), rng)
        assert rec.comparisons == 800
        assert np.all((rec.iterates >= 50.0) & (rec.iterates <= 150.0))
        np.testing.assert_allclose(rec.averages[-1], rec.iterates.mean(0), atol=1e-10)

    def test_identity_one_dimensional_sanity(self):
        prob = QuadraticProblem(np.eye(1), IsotropicNormal((100.0,), 10.0), (np.array([50.0]), np.array([150.0])))
        c = SolverConfig(x1=np.array([60.0]), T=5000, schedule=StrongSmooth(1.0, 1.0), bounds=prob.box)
        rec = run_cba_qp(c, prob, RadialExponential(0.0625), rng=np.random.default_rng(8))
        assert abs(rec.output[0] - 100.0) <= 1.0

    def test_mcba_qp_stage_totals(self, rng):
        plan = StagePlan(3, "B", self.mu, self.L)
        rec = run_mcba_qp(np.full(3, 60.0), plan, self.prob, RadialExponential(0.0625), rng=rng)
        assert rec.T == plan.total == 20 + 36 + 68

    def test_sgd_qp(self, rng):
        c = SolverConfig(x1=np.full(3, 60.0), T=2000, schedule=StrongSmooth(self.mu, self.L), bounds=self.prob.box)
        rec = run_sgd_qp(c, self.prob, self.prob.ground_truth(), rng)
        assert rec.gaps[-1] < rec.gaps[9]


class TestRandomIndex:
    def _record(self, T):
        xs = np.arange(1.0, T + 1.0)
        return RunRecord(iterates=xs, averages=np.cumsum(xs) / np.arange(1, T + 1), output=0.0, comparisons=0, samples=T)

    def test_uniform_law_for_constant_steps(self, rng):
        rec = self._record(10)
        counts = np.zeros(10)
        for _ in range(100_000):
            t, _ = random_index_output(rec, ConstOverSqrtT(10), rng)
            counts[t - 1] += 1
        assert chisquare(counts).pvalue > 0.001

    def test_single_iterate(self, rng):
        rec = self._record(1)
        assert all(random_index_output(rec, InvSqrtT(), rng) == (1, 1.0) for _ in range(20))

    def test_probabilities_normalized(self):
        w = InvSqrtT().steps(50)
        assert math.isclose((w / w.sum()).sum(), 1.0, abs_tol=1e-15)

    def test_output_mode(self, rng):
        c = cfg(T=100, output=RandomIndex(0.2))
        rec = run_cba(c, U, h1(), band_family("uniform", h1(), U), rng=rng)
        assert 1 <= rec.t_star <= 100
        assert rec.output == rec.iterates[rec.t_star - 1]


class TestMoreau:
    def test_params(self):
        with pytest.raises(ValueError):
            MoreauParams(5.0, 0.2)
        with pytest.raises(ValueError):
            MoreauParams(0.0, 0.2)
        MoreauParams(2.5, 0.2)

    def test_fixed_point_at_minimizer(self):
        H = lambda y: (y - 0.3) ** 2
        assert moreau_stationarity(H, 0.3, MoreauParams(0.25, 1.0), (-2.0, 2.0)) <= 1e-6

    def test_quadratic_closed_form(self):
        H = lambda y: y * y + 1.0
        assert abs(moreau_stationarity(H, 1.0, MoreauParams(0.25, 1.0), (-2.0, 2.0)) - 4.0 / 3.0) <= 1e-6

    @given(m=st.floats(-1.0, 1.0), x=st.floats(-2.0, 2.0), lam=st.floats(0.05, 0.45))
    def test_quadratic_prox_formula(self, m, x, lam):
        H = lambda y: (y - m) ** 2
        y = moreau_prox(H, x, MoreauParams(lam, 1.0), (-5.0, 5.0))
        assert abs(y - (2 * lam * m + x) / (1 + 2 * lam)) < 1e-6

    def test_prox_respects_bounds(self):
        H = lambda y: (y - 10.0) ** 2
        assert moreau_prox(H, 1.0, MoreauParams(0.25, 1.0), (-2.0, 2.0)) == pytest.approx(2.0, abs=1e-7)


class TestBaselineOrdering:
    def test_sgd_beats_cba_on_fig1a(self):
        from cbopt.labkit.presets import ExperimentSpec, SeriesSpec
        from cbopt.labkit.runner import run_experiment

        spec = ExperimentSpec("fig1a", (SeriesSpec("cba", "cba"), SeriesSpec("sgd", "sgd")))
        res = run_experiment(spec, trials=1000, seed=7)
        assert res["sgd"].mean[-1] <= res["cba"].mean[-1]
