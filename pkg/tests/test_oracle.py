import math

import numpy as np
import pytest

from shapbound import (
    Affine,
    AttributionProblem,
    EngineConfig,
    Network,
    TooManyFeaturesError,
    check_engine,
    exact_shap,
)
from shapbound import coalition
from shapbound.oracle import all_mask_values, permutation_shap, shapley_weights

from helpers import make_affine_net, make_net, make_problem


class TestExactShap:
    def test_linear_model(self):
        rng = np.random.default_rng(0)
        w = rng.normal(size=(1, 6))
        net = Network((Affine(w, np.array([0.2])),), 6, 1)
        x = rng.normal(size=6)
        z = rng.normal(size=(1, 6))
        prob = AttributionProblem(net, x, z, kind="baseline")
        phi = exact_shap(prob).phi
        assert np.allclose(phi, w[0] * (x - z[0]), atol=1e-12)

    def test_linear_model_marginal_uses_background_mean(self):
        rng = np.random.default_rng(1)
        net = make_affine_net(rng, 5)
        prob = make_problem(rng, net, num_background=7)
        phi = exact_shap(prob).phi
        expected = net.layers[0].weight[0] * (
            prob.explicand - prob.background.mean(axis=0)
        )
        assert np.allclose(phi, expected, atol=1e-12)

    def test_constant_network_zero(self):
        net = Network((Affine(np.zeros((1, 4)), np.array([3.0])),), 4, 1)
        prob = AttributionProblem(net, np.ones(4), np.zeros((1, 4)), kind="baseline")
        result = exact_shap(prob)
        assert np.array_equal(result.phi, np.zeros(4))
        assert result.coalitions_evaluated == 16

    def test_matches_permutation_oracle(self):
        rng = np.random.default_rng(2)
        for g in (3, 4, 5, 6):
            prob = make_problem(rng, make_net(rng, g, [5]), num_background=3)
            phi = exact_shap(prob).phi
            perm = permutation_shap(prob)
            assert np.abs(phi - perm).max() <= 1e-9

    def test_efficiency(self):
        rng = np.random.default_rng(3)
        prob = make_problem(rng, make_net(rng, 7, [9]))
        phi = exact_shap(prob).phi
        values = all_mask_values(prob)
        assert phi.sum() == pytest.approx(values[-1] - values[0], abs=1e-6)

    def test_feature_guard(self):
        rng = np.random.default_rng(4)
        prob = make_problem(rng, make_affine_net(rng, 21), num_background=1)
        with pytest.raises(TooManyFeaturesError):
            exact_shap(prob)


class TestShapleyWeights:
    def test_normalisation(self):
        # sum over all coalitions not containing i of w(|S|) is 1
        for n in range(1, 21):
            w = shapley_weights(n)
            total = sum(math.comb(n - 1, k) * w[k] for k in range(n))
            assert total == pytest.approx(1.0, abs=1e-12)

    def test_against_direct_formula(self):
        for n in (1, 2, 5, 12, 20):
            w = shapley_weights(n)
            for k in range(n):
                direct = 1.0 / (n * math.comb(n - 1, k))
                assert w[k] == pytest.approx(direct, rel=1e-12)


class TestCheckEngine:
    def test_converged_run_contained(self):
        rng = np.random.default_rng(5)
        prob = make_problem(rng, make_net(rng, 8, [10]))
        report = check_engine(prob, EngineConfig(batch_size=512, delta=0.0))
        assert report.contained
        assert report.status == "converged_exact"
        assert report.max_abs_error <= 1e-6
        assert report.max_violation <= 1e-9

    def test_hr_stopped_run_contained(self):
        rng = np.random.default_rng(6)
        prob = make_problem(rng, make_net(rng, 8, [10]))
        report = check_engine(
            prob, EngineConfig(batch_size=64, hr_fraction=0.10,
                               max_iterations=10_000)
        )
        assert report.contained
        gap = report.ub_phi - report.lb_phi
        from shapbound import forward

        out = abs(forward(prob.net, prob.explicand)[0])
        if report.status == "reached_hr":
            assert gap.max() <= 2 * 0.10 * out + 1e-12

    def test_corrupted_lambda_detected(self, monkeypatch):
        # negative control: skew the child weights so conservation breaks;
        # the branch validation is relaxed so the corruption can flow through
        rng = np.random.default_rng(7)
        prob = make_problem(rng, make_net(rng, 6, [8]))
        real_child_lambdas = coalition.child_lambdas

        def corrupted(lam, r, s):
            lam_in, lam_out = real_child_lambdas(lam, r, s)
            return 0.7 * lam_in, 0.7 * lam_out

        monkeypatch.setattr(coalition, "_LAMBDA_REL_TOL", float("inf"))
        monkeypatch.setattr(coalition, "child_lambdas", corrupted)
        report = check_engine(prob, EngineConfig(batch_size=64, delta=0.0))
        assert not report.contained
        assert report.max_violation > 1e-9
