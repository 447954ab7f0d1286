"""
Tests for xbern module
"""

import itertools

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from numpy.testing import assert_allclose

from canaryaudit.exceptions import InvalidInputError, OrderExceedsDimensionError
from canaryaudit.xbern import (
    BetaMixing,
    PointMixing,
    StatMatrix,
    TwoPointMixing,
    aggregate_moments,
    sample_xbern_mixture,
    trial_moments,
)

from .conftest import MIXTURES, brute_force_moments

binary_vectors = st.lists(st.integers(0, 1), min_size=1, max_size=12)


class TestTrialMoments:
    """Per-trial moments computed by the recurrence"""

    def test_known_vector(self):
        assert_allclose(trial_moments([1, 1, 0, 1], 3), [0.75, 0.5, 0.25], atol=1e-15)

    def test_all_zeros(self):
        assert_allclose(trial_moments([0, 0, 0, 0], 4), [0, 0, 0, 0])

    def test_all_ones(self):
        assert_allclose(trial_moments([1, 1, 1, 1], 4), [1, 1, 1, 1])

    @pytest.mark.parametrize("k", range(1, 7))
    def test_matches_enumeration_exhaustively(self, k):
        """Every binary vector of length K <= 6 agrees with subset enumeration"""
        max_order = min(4, k)
        for bits in itertools.product((0, 1), repeat=k):
            x = np.array(bits)
            assert_allclose(
                trial_moments(x, max_order),
                brute_force_moments(x, max_order),
                rtol=0,
                atol=1e-12,
            )

    @pytest.mark.parametrize("k", [8, 10, 12])
    def test_matches_enumeration_on_random_vectors(self, k):
        rng = np.random.default_rng(k)
        for _ in range(1000):
            x = rng.integers(0, 2, size=k)
            assert_allclose(
                trial_moments(x, 4), brute_force_moments(x, 4), rtol=0, atol=1e-12
            )

    @given(binary_vectors, st.randoms(use_true_random=False))
    def test_permutation_invariance(self, bits, random):
        shuffled = list(bits)
        random.shuffle(shuffled)
        order = min(4, len(bits))
        expected = trial_moments(bits, order)
        assert np.array_equal(expected, trial_moments(shuffled, order))

    @given(binary_vectors)
    def test_moments_are_ordered_and_in_unit_interval(self, bits):
        moments = trial_moments(bits, min(4, len(bits)))
        assert np.all(moments >= 0) and np.all(moments <= 1)
        assert np.all(np.diff(moments) <= 1e-15)

    def test_order_above_dimension(self):
        with pytest.raises(OrderExceedsDimensionError):
            trial_moments([1, 0], 3)

    def test_empty_vector(self):
        with pytest.raises(InvalidInputError):
            trial_moments([], 1)

    def test_non_binary_entry(self):
        with pytest.raises(InvalidInputError):
            trial_moments([1, 2, 0], 1)

    def test_order_above_four(self):
        with pytest.raises(InvalidInputError):
            trial_moments([1] * 8, 5)


class TestAggregateMoments:
    """Averaging per-trial moments over a statistics matrix"""

    def test_two_rows(self, sample_matrix):
        moments = aggregate_moments(sample_matrix, 2)
        assert moments.mu(1) == pytest.approx(3 / 8)
        assert moments.mu(2) == pytest.approx(1 / 4)
        assert moments.n == 2

    def test_all_ones(self):
        moments = aggregate_moments(np.ones((5, 6), dtype=int), 4)
        assert [moments.mu(order) for order in range(1, 5)] == [1.0, 1.0, 1.0, 1.0]

    def test_single_column(self):
        moments = aggregate_moments(np.array([[1]]), 1)
        assert moments.mu(1) == 1.0
        with pytest.raises(OrderExceedsDimensionError):
            aggregate_moments(np.array([[1]]), 2)

    def test_mean_of_per_trial_moments(self):
        rng = np.random.default_rng(0)
        matrix = rng.integers(0, 2, size=(50, 9))
        moments = aggregate_moments(matrix, 4)
        expected = np.mean([trial_moments(row, 4) for row in matrix], axis=0)
        assert_allclose([moments.mu(o) for o in range(1, 5)], expected, atol=1e-14)
        assert moments.per_trial.shape == (50, 4)

    def test_column_permutation(self):
        rng = np.random.default_rng(1)
        matrix = rng.integers(0, 2, size=(40, 7))
        permuted = matrix[:, rng.permutation(7)]
        original = aggregate_moments(matrix, 4).mu_hat
        assert original == aggregate_moments(permuted, 4).mu_hat

    def test_missing_order(self, sample_matrix):
        with pytest.raises(InvalidInputError):
            aggregate_moments(sample_matrix, 2).mu(3)

    def test_ragged_or_non_binary_matrix(self):
        with pytest.raises(InvalidInputError):
            StatMatrix(np.array([[0, 3]]))
        with pytest.raises(InvalidInputError):
            StatMatrix(np.array([1, 0]))

    def test_to_dict(self, sample_matrix):
        result = aggregate_moments(sample_matrix, 2).to_dict()
        assert result == {"mu1": 0.375, "mu2": 0.25, "mu3": None, "mu4": None}


class TestMixtureSampler:
    """Exchangeable Bernoulli mixtures used as test oracles"""

    def test_point_mixture_moments(self):
        sample = sample_xbern_mixture(4, 10, PointMixing(0.5), seed=0)
        assert sample.true_moments[1] == 0.5
        assert sample.true_moments[2] == 0.25

    def test_two_point_mixture_moments(self):
        mixing = TwoPointMixing(0.0, 1.0, 0.5)
        assert [mixing.moment(o) for o in range(1, 5)] == [0.5] * 4
        rows = sample_xbern_mixture(8, 100, mixing, seed=1).matrix.rows
        # p is 0 or 1, so every row is constant
        assert set(rows.sum(axis=1)) <= {0, 8}

    def test_uniform_beta_moments(self):
        mixing = BetaMixing(1.0, 1.0)
        assert mixing.moment(1) == pytest.approx(1 / 2)
        assert mixing.moment(2) == pytest.approx(1 / 3)

    def test_deterministic_per_seed(self):
        a = sample_xbern_mixture(6, 20, BetaMixing(2, 5), seed=9).matrix.rows
        b = sample_xbern_mixture(6, 20, BetaMixing(2, 5), seed=9).matrix.rows
        assert np.array_equal(a, b)

    def test_rows_depend_only_on_index(self):
        short = sample_xbern_mixture(6, 10, BetaMixing(2, 5), seed=4).matrix.rows
        long = sample_xbern_mixture(6, 30, BetaMixing(2, 5), seed=4).matrix.rows
        assert np.array_equal(short, long[:10])

    @pytest.mark.parametrize("name", sorted(MIXTURES))
    def test_empirical_moments_match(self, name):
        mixing = MIXTURES[name]
        n = 100_000
        sample = sample_xbern_mixture(4, n, mixing, seed=2024)
        moments = aggregate_moments(sample.matrix, 4)
        for order in range(1, 5):
            mu = sample.true_moments[order]
            # Per-trial moments average K tests, so their variance is below mu(1-mu)
            tolerance = 4 * np.sqrt(mu * (1 - mu) / n)
            assert abs(moments.mu(order) - mu) <= tolerance

    @pytest.mark.parametrize(
        "factory",
        [
            lambda: PointMixing(1.5),
            lambda: TwoPointMixing(0.1, -0.2, 0.5),
            lambda: TwoPointMixing(0.1, 0.2, 2.0),
            lambda: BetaMixing(0.0, 1.0),
        ],
    )
    def test_invalid_parameters(self, factory):
        with pytest.raises(InvalidInputError):
            factory()

    def test_invalid_shape(self):
        with pytest.raises(InvalidInputError):
            sample_xbern_mixture(0, 10, PointMixing(0.5), seed=0)
