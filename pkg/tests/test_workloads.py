import numpy as np
import pytest

from onlinefw import (
    L1Ball,
    TraceNormBall,
    VertexPolytope,
    Workload,
    gen_classification,
    gen_fixed_design_lasso,
    gen_mc,
    gen_random_design_lasso,
    reference_solve,
)


class TestFixedDesignLasso:
    def test_interior_optimum_is_ground_truth(self):
        wl = gen_fixed_design_lasso(30, 40, 0.2, 2.0, r_factor=1.1, seed=5)
        assert wl.theta_star is not None
        assert wl.f(wl.theta_star) == pytest.approx(wl.f_star, abs=1e-12)
        assert np.max(np.abs(wl.grad_f(wl.theta_star))) < 1e-9
        assert np.abs(wl.theta_star).sum() < wl.constraint.radius  # strictly interior

    def test_radius_scales_ground_truth_norm(self):
        wl = gen_fixed_design_lasso(20, 10, 0.3, 1.0, r_factor=0.15, seed=5)
        theta_bar = wl.metadata["theta_bar"]
        assert wl.constraint.radius == pytest.approx(0.15 * np.abs(theta_bar).sum())
        assert wl.theta_star is None and wl.f_star is None

    def test_noiseless_stream_is_exact(self):
        wl = gen_fixed_design_lasso(12, 8, 0.25, sigma_w=0.0, r_factor=1.1, seed=3)
        theta_bar = wl.metadata["theta_bar"]
        design = wl.metadata["design"]
        stream = wl.make_stream()
        oracle = wl.make_oracle()
        for _ in range(5):
            s = next(stream)
            assert np.array_equal(s.y, design @ theta_bar)
            oracle.observe(s)
        # gradient vanishes at the ground truth at any round count
        assert np.max(np.abs(oracle.gradient(theta_bar))) < 1e-10

    def test_stream_reproducible(self):
        wl = gen_fixed_design_lasso(6, 4, 0.5, 1.0, 1.1, seed=8)
        a = [next(wl.make_stream()).y for _ in range(1)]
        first = [s.y for s, _ in zip(wl.make_stream(), range(4))]
        second = [s.y for s, _ in zip(wl.make_stream(), range(4))]
        for x, y in zip(first, second):
            assert np.array_equal(x, y)

    def test_sparsity_count(self):
        wl = gen_fixed_design_lasso(50, 10, 0.1, 1.0, 1.1, seed=0)
        assert np.count_nonzero(wl.metadata["theta_bar"]) == 5

    def test_degenerate_dims_rejected(self):
        with pytest.raises(ValueError):
            gen_fixed_design_lasso(0, 5, 0.5, 1.0, 1.1, seed=0)
        with pytest.raises(ValueError):
            gen_fixed_design_lasso(5, 0, 0.5, 1.0, 1.1, seed=0)


class TestRandomDesignLasso:
    def test_gradient_consistent_with_objective(self):
        wl = gen_random_design_lasso(10, 6, 0.3, 1.5, 1.2, seed=7)
        rng = np.random.default_rng(0)
        theta = rng.standard_normal(10)
        d = rng.standard_normal(10)
        d /= np.linalg.norm(d)
        h = 1e-6
        fd = (wl.f(theta + h * d) - wl.f(theta - h * d)) / (2 * h)
        assert fd == pytest.approx(float(wl.grad_f(theta) @ d), rel=1e-6)

    def test_fresh_design_each_round(self):
        wl = gen_random_design_lasso(6, 4, 0.5, 1.0, 1.1, seed=7)
        stream = wl.make_stream()
        a, b = next(stream), next(stream)
        assert not np.array_equal(a.A, b.A)

    def test_surrogate_error_shrinks(self):
        wl = gen_random_design_lasso(8, 5, 0.25, 1.0, 1.1, seed=7)
        probe = 0.5 * wl.metadata["theta_bar"]
        truth = wl.grad_f(probe)
        oracle = wl.make_oracle()
        stream = wl.make_stream()
        errs = []
        for t in range(1, 2001):
            oracle.observe(next(stream))
            if t in (20, 2000):
                errs.append(np.max(np.abs(oracle.gradient(probe) - truth)))
        assert errs[-1] < errs[0]


class TestGenMc:
    def test_nuclear_norm_matches_svd(self):
        wl = gen_mc(20, 50, 3, noise_var=0.0, R_factor=1.1, seed=1)
        theta_bar = wl.metadata["theta_bar"]
        nuclear = np.linalg.svd(theta_bar, compute_uv=False).sum()
        assert wl.metadata["nuclear_norm"] == pytest.approx(nuclear)
        assert wl.constraint.radius == pytest.approx(1.1 * nuclear)

    def test_interior_optimum(self):
        wl = gen_mc(6, 8, 2, noise_var=0.5, R_factor=1.2, seed=2)
        assert wl.f(wl.theta_star) == pytest.approx(wl.f_star, abs=1e-12)
        assert np.max(np.abs(wl.grad_f(wl.theta_star))) < 1e-12
        # gaussian shifted objective value at the optimum is the noise floor
        assert wl.f_star == pytest.approx(0.25, abs=1e-12)

    def test_gaussian_samples_center_on_truth(self):
        wl = gen_mc(4, 4, 2, noise_var=0.0, R_factor=1.1, seed=3)
        theta_bar = wl.metadata["theta_bar"]
        for s, _ in zip(wl.make_stream(), range(10)):
            assert s.value == pytest.approx(theta_bar[s.row, s.col])

    def test_logistic_link_emits_binary(self):
        wl = gen_mc(4, 4, 2, noise_var=0.0, R_factor=1.1, link="logistic", seed=3)
        values = {s.value for s, _ in zip(wl.make_stream(), range(40))}
        assert values <= {0.0, 1.0}

    def test_paper_scale_flagged_long_running(self):
        with pytest.warns(RuntimeWarning):
            gen_mc(200, 5000, 20, noise_var=3.0, R_factor=1.1, seed=0)

    def test_rank_zero_rejected(self):
        with pytest.raises(ValueError):
            gen_mc(4, 4, 0, seed=0)


class TestGenClassification:
    def test_clean_labels_match_margin(self):
        wl = gen_classification(5, 5, 2, n_train=50, flip_frac=0.0, seed=4)
        theta_bar = wl.metadata["theta_bar"]
        for s in wl.make_stream():
            margin = float(np.vdot(theta_bar, s.features.reshape(5, 5)))
            assert s.label == (1 if margin >= 0 else -1)

    def test_flip_fraction_binomial(self):
        n = 10_000
        wl = gen_classification(4, 4, 2, n_train=n, flip_frac=0.25, seed=4)
        theta_bar = wl.metadata["theta_bar"]
        flips = 0
        for s in wl.make_stream():
            clean = 1 if float(np.vdot(theta_bar, s.features.reshape(4, 4))) >= 0 else -1
            flips += s.label != clean
        sd = np.sqrt(n * 0.25 * 0.75)
        assert abs(flips - 0.25 * n) <= 3 * sd

    def test_stream_is_finite(self):
        wl = gen_classification(3, 3, 1, n_train=7, seed=0)
        assert sum(1 for _ in wl.make_stream()) == 7

    def test_l1_constraint_flattens_features(self):
        wl = gen_classification(3, 4, 1, n_train=2, seed=0, constraint_kind="l1", radius=2.0)
        assert isinstance(wl.constraint, L1Ball)
        assert wl.constraint.dim == 12
        assert next(wl.make_stream()).features.shape == (12,)

    def test_trace_constraint_keeps_matrices(self):
        wl = gen_classification(3, 4, 1, n_train=2, seed=0, constraint_kind="trace", radius=1.0)
        assert isinstance(wl.constraint, TraceNormBall)
        assert next(wl.make_stream()).features.shape == (3, 4)

    def test_no_objective_closure(self):
        wl = gen_classification(3, 3, 1, n_train=2, seed=0)
        assert wl.f is None and wl.f_star is None and wl.theta_star is None


class TestReferenceSolve:
    def test_interior_lasso_recovers_analytic_optimum(self):
        # strongly convex instance (m > n); the reference value lands far
        # inside 1e-6 of the analytic optimum, certified by the gap bound
        wl = gen_fixed_design_lasso(15, 25, 0.2, 1.0, r_factor=1.2, seed=11)
        ref = reference_solve(wl, budget=100_000)
        err = abs(ref.f_star - wl.f_star)
        assert err <= 1e-6
        assert err <= ref.certificate

    def test_toy_quadratic_over_simplex(self):
        # min 0.5||theta - c||^2 over the 2-simplex; c projects onto
        # (c1 - c2 + 1) / 2 in the first coordinate (hand solution)
        c = np.array([0.4, 0.1])
        constraint = VertexPolytope(np.eye(2))

        wl = Workload(
            name="toy",
            constraint=constraint,
            make_oracle=lambda: None,
            make_stream=lambda: iter(()),
            f=lambda th: 0.5 * float(np.sum((th - c) ** 2)),
            grad_f=lambda th: th - c,
        )
        x1 = (c[0] - c[1] + 1.0) / 2.0
        optimum = np.array([x1, 1.0 - x1])
        ref = reference_solve(wl, budget=50_000, gap_tol=1e-10)
        assert ref.f_star == pytest.approx(0.5 * float(np.sum((optimum - c) ** 2)), abs=1e-8)

    def test_boundary_certificate_bound(self):
        wl = gen_fixed_design_lasso(15, 25, 0.2, 1.0, r_factor=0.2, seed=11)
        ref = reference_solve(wl, budget=100_000, gap_tol=None)
        assert ref.certificate < 1e-5 * ref.f_star
        assert wl.f(ref.theta) == pytest.approx(ref.f_star)

    def test_requires_exact_closures(self):
        wl = gen_classification(3, 3, 1, n_train=2, seed=0)
        with pytest.raises(ValueError):
            reference_solve(wl, budget=10)
