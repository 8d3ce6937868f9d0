import math

import numpy as np
import pytest

from gremparisi import (
    FiniteMeasure,
    InvalidInputError,
    MarkovKernel,
    ModelSpec,
    SupportAxis,
    compose,
    conditional_relative_entropy,
    disintegrate,
    entropy_dual_gap,
    marginal,
    product_measure,
    relative_entropy,
    total_variation,
)

from instances import KL_EXAMPLE, random_measure, random_model


def line(weights, labels=None):
    labels = range(len(weights)) if labels is None else labels
    return FiniteMeasure([SupportAxis(labels)], weights)


class TestConstruction:
    def test_weights_must_normalize(self):
        with pytest.raises(InvalidInputError):
            line([0.5, 0.6])

    def test_negative_weight_rejected(self):
        with pytest.raises(InvalidInputError):
            line([1.2, -0.2])

    def test_shape_mismatch(self):
        with pytest.raises(InvalidInputError):
            FiniteMeasure([SupportAxis.range(3)], [0.5, 0.5])

    def test_weights_are_read_only(self):
        nu = line([0.5, 0.5])
        with pytest.raises(ValueError):
            nu.weights[0] = 1.0

    def test_duplicate_labels(self):
        with pytest.raises(InvalidInputError):
            SupportAxis(["a", "a"])

    def test_model_rejects_zero_weight(self):
        with pytest.raises(InvalidInputError):
            ModelSpec([1.0], [((0, 1), [1.0, 0.0])])

    def test_model_rejects_bad_gamma(self):
        with pytest.raises(InvalidInputError):
            ModelSpec([0.6, 0.5], [((0, 1), [0.5, 0.5])] * 2)

    def test_model_cell_cap(self):
        with pytest.raises(InvalidInputError):
            ModelSpec([0.5, 0.5], [(range(1001), np.full(1001, 1 / 1001))] * 2)


class TestProduct:
    def test_product_of_uniforms(self):
        p = product_measure([line([0.5, 0.5]), line([0.5, 0.5])])
        np.testing.assert_allclose(p.weights, np.full((2, 2), 0.25))

    def test_single_level_identity(self):
        p = product_measure([line([0.9, 0.1])])
        np.testing.assert_array_equal(p.weights, [0.9, 0.1])

    def test_two_level_example(self):
        p = product_measure([line([0.9, 0.1]), line([0.3, 0.7])])
        np.testing.assert_allclose(p.weights.ravel(), [0.27, 0.63, 0.03, 0.07], atol=1e-15)

    def test_multidimensional_factor_rejected(self):
        two = product_measure([line([0.5, 0.5]), line([0.5, 0.5])])
        with pytest.raises(InvalidInputError):
            product_measure([two, line([1.0])])


class TestMarginal:
    nu = product_measure([line([0.9, 0.1]), line([0.3, 0.7])])

    def test_last_level_is_identity(self):
        assert marginal(self.nu, 2).weights is not None
        np.testing.assert_array_equal(marginal(self.nu, 2).weights, self.nu.weights)

    def test_row_sums(self):
        np.testing.assert_allclose(marginal(self.nu, 1).weights, [0.9, 0.1])

    @pytest.mark.parametrize("j", [0, 3])
    def test_out_of_range(self, j):
        with pytest.raises(InvalidInputError):
            marginal(self.nu, j)


class TestRelativeEntropy:
    def test_zero_on_diagonal(self):
        mu = line([0.2, 0.3, 0.5])
        assert relative_entropy(mu, mu) == 0.0

    def test_point_mass_against_uniform(self):
        assert relative_entropy(line([1.0, 0.0]), line([0.5, 0.5])) == pytest.approx(math.log(2), abs=1e-15)

    def test_two_point_example(self):
        assert relative_entropy(line([0.6905, 0.3095]), line([0.1, 0.9])) == pytest.approx(KL_EXAMPLE, abs=1e-14)

    def test_infinite_without_absolute_continuity(self):
        assert relative_entropy(line([0.5, 0.5]), line([1.0, 0.0])) == math.inf

    def test_axis_mismatch(self):
        with pytest.raises(InvalidInputError):
            relative_entropy(line([0.5, 0.5], "ab"), line([0.5, 0.5], "xy"))

    def test_nonnegative_and_permutation_invariant(self):
        rng = np.random.default_rng(3)
        for _ in range(200):
            k = int(rng.integers(2, 7))
            nu, mu = rng.dirichlet(np.ones(k)), rng.dirichlet(np.ones(k))
            h = relative_entropy(line(nu), line(mu))
            assert h >= 0
            perm = rng.permutation(k)
            assert relative_entropy(line(nu[perm]), line(mu[perm])) == pytest.approx(h, rel=1e-12, abs=1e-15)


class TestDisintegration:
    def test_product_gives_constant_rows(self):
        nu = product_measure([line([0.9, 0.1]), line([0.3, 0.7])])
        head, K = disintegrate(nu, 2)
        np.testing.assert_allclose(head.weights, [0.9, 0.1])
        np.testing.assert_allclose(K.table, [[0.3, 0.7], [0.3, 0.7]], atol=1e-15)

    def test_point_mass_kernel(self):
        axes = [SupportAxis("ab"), SupportAxis("xy")]
        nu = FiniteMeasure(axes, [[0.0, 1.0], [0.0, 0.0]])
        head, K = disintegrate(nu, 2)
        np.testing.assert_array_equal(K.table[0], [0.0, 1.0])
        assert K.reachable.tolist() == [True, False]

    def test_compose_round_trip(self):
        rng = np.random.default_rng(4)
        model = random_model(rng, n=3)
        for _ in range(20):
            nu = random_measure(rng, model, zeros=True)
            for j in range(2, 4):
                head, K = disintegrate(nu, j)
                np.testing.assert_allclose(compose(head, K).weights, marginal(nu, j).weights, atol=1e-15)

    def test_kernel_rows_validated(self):
        with pytest.raises(InvalidInputError):
            MarkovKernel([SupportAxis.range(2)], SupportAxis.range(2), [[0.5, 0.6], [0.5, 0.5]])


class TestChainRule:
    def test_chain_rule_on_random_measures(self):
        rng = np.random.default_rng(5)
        for _ in range(200):
            model = random_model(rng)
            nu = random_measure(rng, model, zeros=bool(rng.integers(2)))
            mu = model.mu
            joint = relative_entropy(nu, mu)
            for j in range(1, model.n):
                split = relative_entropy(marginal(nu, j), marginal(mu, j))
                split += conditional_relative_entropy(nu, mu, j)
                assert split == pytest.approx(joint, abs=1e-10)


class TestDualGap:
    def test_zero_test_function(self):
        nu, mu = line([0.2, 0.8]), line([0.6, 0.4])
        assert entropy_dual_gap(nu, mu, [0.0, 0.0]) == pytest.approx(relative_entropy(nu, mu), abs=1e-15)

    def test_equality_at_log_density(self):
        nu, mu = line([0.2, 0.3, 0.5]), line([0.6, 0.3, 0.1])
        u = np.log(nu.weights / mu.weights)
        assert entropy_dual_gap(nu, mu, u) == pytest.approx(0.0, abs=1e-14)

    def test_random_test_functions_give_positive_gap(self):
        rng = np.random.default_rng(6)
        for _ in range(200):
            k = int(rng.integers(2, 6))
            nu, mu = line(rng.dirichlet(np.ones(k))), line(rng.dirichlet(np.ones(k)))
            assert entropy_dual_gap(nu, mu, rng.normal(size=k)) > 0

    def test_infinite_entropy(self):
        assert entropy_dual_gap(line([0.5, 0.5]), line([1.0, 0.0]), [0.0, 0.0]) == math.inf


def test_total_variation():
    assert total_variation(line([1.0, 0.0]), line([0.0, 1.0])) == 1.0
    assert total_variation(line([0.5, 0.5]), line([0.25, 0.75])) == pytest.approx(0.25)
