import math

import numpy as np
import pytest

from xcalib.explainers import (
    DegenerateDesignError,
    ExplainerConfig,
    InsufficientPerturbationsError,
    TargetKind,
    exact_shapley,
    explain,
    fit_surrogate,
    lime_weight,
    shap_weight,
)
from xcalib.perturbation import Mask, PerturbationConfig, Strategy, enumerate_masks
from xcalib.types import ExplainerKind

from helpers import FunctionPredictor, generic_qa_instance, linear_predictor, presence, random_table_predictor


def full_cfg(kernel, n=None, lam=0.0, count=None, seed=0, sigma=0.25):
    pert = PerturbationConfig(
        count=count or 2048,
        strategy=Strategy.EXHAUSTIVE if count is None else Strategy.UNIFORM_SIZE,
        seed=seed,
    )
    return ExplainerConfig(
        kernel=kernel, sigma=sigma, ridge_lambda=lam,
        perturbation=pert, target=TargetKind.PREDICTED_SPAN_PROB,
    )


class TestLimeWeight:
    def test_all_ones_is_one(self):
        for n in (1, 4, 9):
            assert lime_weight(Mask.ones(n), sigma=0.1) == 1.0

    def test_single_active_of_four(self):
        w = lime_weight(Mask(bits=(1, 0, 0, 0)), sigma=0.25)
        assert abs(w - math.exp(-8.0)) < 1e-12
        assert abs(w - 3.3546e-4) < 1e-8

    def test_monotone_in_active_count(self):
        for n in range(2, 17):
            weights = [
                lime_weight(Mask(bits=tuple(1 if i < k else 0 for i in range(n))), 0.25)
                for k in range(1, n + 1)
            ]
            assert all(a <= b for a, b in zip(weights, weights[1:]))

    def test_all_zeros_convention(self):
        sigma = 0.5
        assert abs(lime_weight(Mask.zeros(6), sigma) - math.exp(-1 / sigma**2)) < 1e-12


class TestShapWeight:
    def test_derived_values(self):
        assert math.isclose(shap_weight(Mask(bits=(1, 0, 0, 0))), 0.25)
        assert math.isclose(shap_weight(Mask(bits=(1, 1, 0, 0))), 0.125)
        assert math.isclose(shap_weight(Mask(bits=(1, 0))), 0.5)

    def test_endpoints_infinite(self):
        assert math.isinf(shap_weight(Mask.ones(5)))
        assert math.isinf(shap_weight(Mask.zeros(5)))


class TestFitSurrogate:
    def test_exact_linear_recovery_against_normal_equations(self):
        masks = enumerate_masks(2)
        y = [2 * m.bits[0] - 1 * m.bits[1] for m in masks]
        w = [1.0] * 4
        fit = fit_surrogate(y, masks, w, ridge_lambda=0.0)
        # independent oracle: plain normal equations on the 4 points
        x = np.array([[1, m.bits[0], m.bits[1]] for m in masks], dtype=float)
        beta = np.linalg.solve(x.T @ x, x.T @ np.asarray(y, dtype=float))
        assert abs(fit.attribution.phi0 - beta[0]) < 1e-10
        assert np.allclose(fit.attribution.phis, beta[1:], atol=1e-10)
        assert fit.weighted_sse < 1e-18

    def test_constant_target(self):
        masks = enumerate_masks(3)
        fit = fit_surrogate([0.5] * 8, masks, [1.0] * 8, ridge_lambda=0.0)
        assert abs(fit.attribution.phi0 - 0.5) < 1e-12
        assert np.allclose(fit.attribution.phis, 0.0, atol=1e-12)

    def test_ridge_shrinks_coefficients(self):
        masks = enumerate_masks(2)
        y = [2 * m.bits[0] - 1 * m.bits[1] for m in masks]
        w = [1.0] * 4
        free = fit_surrogate(y, masks, w, ridge_lambda=0.0)
        ridged = fit_surrogate(y, masks, w, ridge_lambda=10.0)
        assert np.linalg.norm(ridged.attribution.phis) < np.linalg.norm(free.attribution.phis)
        # closed form with unpenalized intercept
        x = np.array([[1, m.bits[0], m.bits[1]] for m in masks], dtype=float)
        d = np.diag([0.0, 1.0, 1.0])
        beta = np.linalg.solve(x.T @ x + 10.0 * d, x.T @ np.asarray(y, dtype=float))
        assert abs(ridged.attribution.phi0 - beta[0]) < 1e-9
        assert np.allclose(ridged.attribution.phis, beta[1:], atol=1e-9)

    def test_degenerate_unregularized_design_errors(self):
        masks = [Mask(bits=(1, 0))] * 5
        with pytest.raises(DegenerateDesignError):
            fit_surrogate([0.3] * 5, masks, [1.0] * 5, ridge_lambda=0.0)
        fit = fit_surrogate([0.3] * 5, masks, [1.0] * 5, ridge_lambda=1e-3)
        assert fit.attribution is not None

    def test_constraints_pin_endpoints(self):
        masks = enumerate_masks(3)
        rng = np.random.default_rng(0)
        y = rng.random(8)
        w = [shap_weight(m) for m in masks]
        v0, v1 = float(y[0]), float(y[-1])
        fit = fit_surrogate(y, masks, w, ridge_lambda=0.0, constraints=(v0, v1))
        assert abs(fit.attribution.phi0 - v0) < 1e-12
        assert abs(fit.attribution.phi0 + sum(fit.attribution.phis) - v1) < 1e-10

    def test_order_invariance(self):
        masks = enumerate_masks(4)
        rng = np.random.default_rng(3)
        y = rng.random(16)
        w = [lime_weight(m, 0.25) for m in masks]
        fit_a = fit_surrogate(list(y), masks, w, ridge_lambda=1e-6)
        order = rng.permutation(16)
        fit_b = fit_surrogate(
            [y[i] for i in order], [masks[i] for i in order], [w[i] for i in order],
            ridge_lambda=1e-6,
        )
        assert np.allclose(fit_a.attribution.phis, fit_b.attribution.phis, atol=1e-9)
        assert abs(fit_a.attribution.phi0 - fit_b.attribution.phi0) < 1e-9

    def test_objective_nested_mask_monotonicity(self):
        rng = np.random.default_rng(8)
        n = 6
        superset = [Mask(bits=tuple(int(b) for b in row)) for row in rng.integers(0, 2, (n + 30, n))]
        subset = superset[: n + 10]
        design = np.hstack([np.ones((len(subset), 1)), np.array([m.bits for m in subset])])
        assert np.linalg.matrix_rank(design) == n + 1  # precondition for the lam=0 fits
        y_all = {m: float(rng.random()) for m in set(superset)}
        w_sub = [1.0] * len(subset)
        fit_sub = fit_surrogate([y_all[m] for m in subset], subset, w_sub, ridge_lambda=0.0)
        fit_sup = fit_surrogate(
            [y_all[m] for m in superset], superset, [1.0] * len(superset), ridge_lambda=0.0
        )
        phi0, phis = fit_sup.attribution.phi0, np.array(fit_sup.attribution.phis)
        z = np.array([m.bits for m in subset], dtype=float)
        res = np.array([y_all[m] for m in subset]) - phi0 - z @ phis
        sup_on_subset = float(np.sum(res**2))
        assert fit_sub.weighted_sse <= sup_on_subset + 1e-12


class TestExplain:
    def test_linear_probability_recovery_lime(self):
        inst = generic_qa_instance(2)
        predictor = linear_predictor([0.2, 0.05], bias=0.1)
        cfg = full_cfg(ExplainerKind.LIME, lam=1e-8)
        attr = explain(inst, predictor, cfg)
        assert abs(attr.phis[0] - 0.2) < 1e-4
        assert abs(attr.phis[1] - 0.05) < 1e-4

    def test_irrelevant_token_gets_zero(self):
        inst = generic_qa_instance(3)
        predictor = linear_predictor([0.3, 0.2, 0.0], bias=0.1)
        for kernel in (ExplainerKind.LIME, ExplainerKind.SHAP):
            attr = explain(inst, predictor, full_cfg(kernel, lam=1e-8))
            assert abs(attr.phis[2]) < 1e-4

    def test_shap_matches_exact_oracle_with_interactions(self):
        inst = generic_qa_instance(10)

        def bumpy(seq):
            bits = presence(seq)
            score = 0.3 + 0.04 * bits[0] + 0.03 * bits[5]
            score += 0.05 * bits[1] * bits[2] - 0.02 * bits[3] * bits[7]
            return score

        predictor = FunctionPredictor(bumpy)
        attr = explain(inst, predictor, full_cfg(ExplainerKind.SHAP, lam=0.0))
        oracle = exact_shapley(inst, predictor, TargetKind.PREDICTED_SPAN_PROB)
        assert np.allclose(attr.phis, oracle.phis, atol=1e-3)

    def test_deterministic_given_config(self):
        inst = generic_qa_instance(6)
        predictor = random_table_predictor("det")
        cfg = ExplainerConfig(
            kernel=ExplainerKind.LIME,
            perturbation=PerturbationConfig(count=64, seed=9),
            target=TargetKind.PREDICTED_SPAN_PROB,
        )
        a = explain(inst, predictor, cfg)
        b = explain(inst, predictor, cfg)
        assert a == b

    def test_insufficient_perturbations(self):
        inst = generic_qa_instance(10)
        cfg = ExplainerConfig(
            kernel=ExplainerKind.LIME,
            perturbation=PerturbationConfig(count=8, seed=0),
            target=TargetKind.PREDICTED_SPAN_PROB,
        )
        with pytest.raises(InsufficientPerturbationsError):
            explain(inst, linear_predictor([0.01] * 10), cfg)

    def test_shap_local_accuracy(self):
        inst = generic_qa_instance(7)
        predictor = random_table_predictor("eff")
        cfg = ExplainerConfig(
            kernel=ExplainerKind.SHAP,
            ridge_lambda=1e-3,
            perturbation=PerturbationConfig(count=128, seed=4),
            target=TargetKind.PREDICTED_SPAN_PROB,
        )
        attr = explain(inst, predictor, cfg)
        full_score = predictor.fn(tuple(f"t{i}" for i in range(7)))
        assert abs(attr.total - full_score) < 1e-4


class TestExactShapley:
    def test_additive_value_function(self):
        inst = generic_qa_instance(2)
        predictor = linear_predictor([2.0, -1.0])
        attr = exact_shapley(inst, predictor, TargetKind.PREDICTED_SPAN_PROB)
        assert np.allclose(attr.phis, [2.0, -1.0], atol=1e-12)
        assert attr.phi0 == 0.0

    def test_symmetric_value_function(self):
        inst = generic_qa_instance(3)
        predictor = FunctionPredictor(lambda seq: float(sum(presence(seq))) ** 2 / 9)
        attr = exact_shapley(inst, predictor, TargetKind.PREDICTED_SPAN_PROB)
        assert abs(attr.phis[0] - attr.phis[1]) < 1e-12
        assert abs(attr.phis[1] - attr.phis[2]) < 1e-12

    def test_efficiency_axiom(self):
        inst = generic_qa_instance(5)
        predictor = random_table_predictor("effic")
        attr = exact_shapley(inst, predictor, TargetKind.PREDICTED_SPAN_PROB)
        full = predictor.fn(tuple(f"t{i}" for i in range(5)))
        assert abs(attr.total - full) < 1e-12

    def test_size_limit(self):
        with pytest.raises(ValueError, match="oracle"):
            exact_shapley(generic_qa_instance(13), linear_predictor([0.0] * 13),
                          TargetKind.PREDICTED_SPAN_PROB)


def test_kernel_shap_equals_exact_shapley_small_n():
    for n in range(2, 8):
        inst = generic_qa_instance(n, instance_id=f"ks{n}")
        predictor = random_table_predictor(f"ks{n}")
        attr = explain(inst, predictor, full_cfg(ExplainerKind.SHAP, lam=0.0))
        oracle = exact_shapley(inst, predictor, TargetKind.PREDICTED_SPAN_PROB)
        assert np.allclose(attr.phis, oracle.phis, atol=1e-6), f"n={n}"
        assert abs(attr.phi0 - oracle.phi0) < 1e-9
