import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from albench.acquisition import (
    AcquisitionMethod,
    AcquisitionScore,
    attach_ids,
    bald_scores,
    discriminator_scores,
    entropy_scores,
    random_scores,
    select_top_k,
    validate_mc_probs,
    variation_ratio_scores,
)
from albench.errors import ConfigError, KTooLargeError


def normalize(raw):
    """Turn positive raw values into a valid probability tensor."""
    raw = np.asarray(raw, dtype=np.float64)
    return raw / raw.sum(axis=-1, keepdims=True)


def mc_tensor(rng, t, n, c):
    return normalize(rng.uniform(0.01, 1.0, size=(t, n, c)))


def brute_force_bald(mc):
    """Independent loop-based evaluation of the same estimator."""
    t, n, c = mc.shape
    out = np.zeros(n)
    for i in range(n):
        mean_p = sum(mc[j, i] for j in range(t)) / t
        h_mean = -sum(p * math.log(p) for p in mean_p if p > 0)
        h_each = [
            -sum(p * math.log(p) for p in mc[j, i] if p > 0) for j in range(t)
        ]
        out[i] = max(h_mean - sum(h_each) / t, 0.0)
    return out


class TestEntropy:
    def test_uniform_ten_classes(self):
        mc = np.full((1, 1, 10), 0.1)
        assert entropy_scores(mc)[0] == pytest.approx(math.log(10), abs=1e-9)

    def test_one_hot_zero(self):
        mc = np.zeros((1, 1, 5))
        mc[0, 0, 2] = 1.0
        assert entropy_scores(mc)[0] == pytest.approx(0.0, abs=1e-12)

    def test_binary_symmetric(self):
        mc = np.array([[[0.5, 0.5]]])
        assert entropy_scores(mc)[0] == pytest.approx(math.log(2), abs=1e-9)

    def test_class_permutation_invariant(self):
        rng = np.random.default_rng(0)
        mc = mc_tensor(rng, 4, 6, 5)
        perm = rng.permutation(5)
        np.testing.assert_allclose(entropy_scores(mc), entropy_scores(mc[:, :, perm]))

    def test_bounds(self):
        rng = np.random.default_rng(1)
        mc = mc_tensor(rng, 8, 50, 7)
        scores = entropy_scores(mc)
        assert np.all(scores >= 0) and np.all(scores <= math.log(7) + 1e-12)


class TestBald:
    def test_identical_slices_zero(self):
        rng = np.random.default_rng(2)
        one = mc_tensor(rng, 1, 10, 4)
        mc = np.repeat(one, 5, axis=0)
        np.testing.assert_allclose(bald_scores(mc), 0.0, atol=1e-9)

    def test_two_one_hot_passes(self):
        mc = np.array([[[1.0, 0.0]], [[0.0, 1.0]]])
        assert bald_scores(mc)[0] == pytest.approx(math.log(2), abs=1e-9)

    def test_matches_brute_force(self):
        rng = np.random.default_rng(3)
        mc = mc_tensor(rng, 6, 40, 5)
        np.testing.assert_allclose(bald_scores(mc), brute_force_bald(mc), atol=1e-9)

    def test_bounded_by_entropy(self):
        rng = np.random.default_rng(4)
        for _ in range(50):
            mc = mc_tensor(rng, 5, 20, 6)
            assert np.all(bald_scores(mc) <= entropy_scores(mc) + 1e-9)

    def test_nonnegative(self):
        rng = np.random.default_rng(5)
        mc = mc_tensor(rng, 3, 30, 4)
        assert np.all(bald_scores(mc) >= 0)


class TestVariationRatio:
    def test_all_passes_agree(self):
        mc = np.repeat(normalize(np.array([[[5.0, 1.0, 1.0]]])), 10, axis=0)
        assert variation_ratio_scores(mc)[0] == 0.0

    def test_two_passes_disagree(self):
        mc = np.array([[[0.9, 0.1]], [[0.1, 0.9]]])
        assert variation_ratio_scores(mc)[0] == pytest.approx(0.5)

    def test_modal_six_of_ten(self):
        slices = [[0.8, 0.1, 0.1]] * 6 + [[0.1, 0.8, 0.1]] * 3 + [[0.1, 0.1, 0.8]]
        mc = np.array(slices)[:, None, :]
        assert variation_ratio_scores(mc)[0] == pytest.approx(0.4)

    def test_tie_takes_lowest_class(self):
        # per-pass argmax ties between classes 0 and 1 resolve to class 0
        mc = np.array([[[0.5, 0.5]], [[0.5, 0.5]]])
        assert variation_ratio_scores(mc)[0] == 0.0

    def test_range(self):
        rng = np.random.default_rng(6)
        mc = mc_tensor(rng, 7, 40, 4)
        scores = variation_ratio_scores(mc)
        assert np.all(scores >= 0) and np.all(scores < 1)


class TestRandomScores:
    def test_deterministic_under_seed(self):
        a = random_scores(20, np.random.default_rng(7))
        b = random_scores(20, np.random.default_rng(7))
        np.testing.assert_array_equal(a, b)

    def test_different_seeds_differ(self):
        a = random_scores(20, np.random.default_rng(7))
        b = random_scores(20, np.random.default_rng(8))
        assert not np.array_equal(a, b)

    def test_selection_frequency(self):
        # any fixed id is selected with probability K/N = 1/2
        rng = np.random.default_rng(9)
        ids = [f"s{i:02d}" for i in range(10)]
        hits = 0
        trials = 10_000
        for _ in range(trials):
            scores = attach_ids(ids, random_scores(10, rng))
            if "s00" in select_top_k(scores, 5):
                hits += 1
        assert hits / trials == pytest.approx(0.5, abs=0.02)


class TestDiscriminatorScores:
    def test_extracts_positive_column(self):
        probs = np.array([[0.3, 0.7], [0.9, 0.1]])
        np.testing.assert_allclose(discriminator_scores(probs), [0.7, 0.1])

    def test_rejects_bad_shape(self):
        with pytest.raises(ValueError):
            discriminator_scores(np.zeros((4, 3)))

    def test_scores_in_unit_interval(self):
        rng = np.random.default_rng(10)
        probs = normalize(rng.uniform(0.01, 1, size=(30, 2)))
        scores = discriminator_scores(probs)
        assert np.all((scores >= 0) & (scores <= 1))


class TestSelectTopK:
    def test_basic_ordering(self):
        scores = [AcquisitionScore("a", 0.9), AcquisitionScore("b", 0.1), AcquisitionScore("c", 0.8)]
        assert set(select_top_k(scores, 2)) == {"a", "c"}

    def test_k_equals_n(self):
        scores = [AcquisitionScore(f"s{i}", float(i)) for i in range(5)]
        assert len(select_top_k(scores, 5)) == 5

    def test_all_equal_takes_lexicographic(self):
        scores = [AcquisitionScore(s, 1.0) for s in ("delta", "alpha", "candy", "bravo")]
        assert select_top_k(scores, 3) == ["alpha", "bravo", "candy"]

    def test_k_too_large(self):
        with pytest.raises(KTooLargeError):
            select_top_k([AcquisitionScore("a", 1.0)], 2)

    @settings(max_examples=50, deadline=None)
    @given(
        values=st.lists(st.floats(0, 1, allow_nan=False), min_size=1, max_size=30),
        seed=st.integers(0, 1000),
    )
    def test_permutation_invariant(self, values, seed):
        ids = [f"id{i:03d}" for i in range(len(values))]
        scores = attach_ids(ids, np.array(values))
        k = len(values) // 2 + 1
        base = select_top_k(scores, k)
        rng = np.random.default_rng(seed)
        shuffled = [scores[i] for i in rng.permutation(len(scores))]
        assert select_top_k(shuffled, k) == base
        chosen = set(base)
        floor = min(s.score for s in scores if s.sample_id in chosen)
        assert all(s.score <= floor or s.sample_id in chosen for s in scores)


class TestValidateMcProbs:
    def test_rejects_wrong_ndim(self):
        with pytest.raises(ValueError):
            validate_mc_probs(np.zeros((3, 4)))

    def test_rejects_unnormalized(self):
        with pytest.raises(ValueError):
            validate_mc_probs(np.full((1, 2, 3), 0.5))

    def test_accepts_valid(self):
        rng = np.random.default_rng(11)
        validate_mc_probs(mc_tensor(rng, 2, 3, 4))


@settings(max_examples=60, deadline=None)
@given(
    arrays(
        np.float64,
        (4, 8, 5),
        elements=st.floats(0.01, 1.0, allow_nan=False, allow_infinity=False),
    )
)
def test_information_bound_property(raw):
    mc = normalize(raw)
    bald = bald_scores(mc)
    entropy = entropy_scores(mc)
    assert np.all(bald >= 0)
    assert np.all(bald <= entropy + 1e-9)


def test_acquisition_method_validation():
    AcquisitionMethod(tag="bald", mc_passes=5)
    with pytest.raises(ConfigError):
        AcquisitionMethod(tag="mystery")
    with pytest.raises(ConfigError):
        AcquisitionMethod(tag="bald", mc_passes=0)
