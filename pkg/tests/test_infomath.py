from __future__ import annotations

import math

import numpy as np
import pytest

from intentsketch.core import AnswerPosterior, ClassDistribution, ObjectiveWeights
from intentsketch.errors import (
    ClassIdMismatch,
    InvalidDistribution,
    NegativeEntropyInput,
    NonUnitVector,
)
from intentsketch.infomath import (
    Distribution,
    bayes_risk_01,
    entropy,
    information_gain,
    mixture,
    pairwise_diversity,
    semantic_entropy,
    set_objective,
)

# Frozen expected values computed with an independent high-precision summation
# of -sum(p * ln p) (mpmath at 50 digits).
ENTROPY_07_02_01 = 0.80181855254333735
ENTROPY_06_03_01 = 0.89794572485677979


def test_entropy_degenerate_is_zero():
    assert entropy([1.0]) == 0.0
    assert entropy([0.0, 1.0, 0.0]) == 0.0


def test_entropy_uniform_is_log_n():
    assert entropy([0.25] * 4) == pytest.approx(math.log(4), abs=1e-9)


def test_entropy_frozen_value():
    assert entropy([0.7, 0.2, 0.1]) == pytest.approx(ENTROPY_07_02_01, abs=1e-9)


def test_entropy_rejects_invalid():
    with pytest.raises(InvalidDistribution):
        entropy([0.5, 0.2])
    with pytest.raises(InvalidDistribution):
        entropy([-0.1, 1.1])


def test_entropy_permutation_invariant_property():
    rng = np.random.default_rng(11)
    for _ in range(200):
        probs = rng.dirichlet(np.ones(rng.integers(2, 8)))
        shuffled = rng.permutation(probs)
        assert entropy(probs) == pytest.approx(entropy(shuffled), abs=1e-12)


def test_entropy_maximized_by_uniform_property():
    rng = np.random.default_rng(23)
    for _ in range(500):
        n = int(rng.integers(2, 9))
        probs = rng.dirichlet(np.ones(n))
        assert entropy(probs) <= math.log(n) + 1e-12


def test_distribution_carrier_accepted():
    d = Distribution.of([0.5, 0.5])
    assert entropy(d) == pytest.approx(math.log(2), abs=1e-12)
    assert len(d) == 2


def test_semantic_entropy_matches_entropy():
    cd = ClassDistribution(classes=("m0", "m1", "m2"), probs=(0.6, 0.3, 0.1))
    assert semantic_entropy(cd) == pytest.approx(ENTROPY_06_03_01, abs=1e-9)
    assert semantic_entropy(cd) == pytest.approx(entropy(cd.probs), abs=1e-15)


def test_semantic_entropy_degenerate_and_symmetric():
    assert semantic_entropy(ClassDistribution(classes=(0,), probs=(1.0,))) == 0.0
    two = ClassDistribution(classes=(0, 1), probs=(0.5, 0.5))
    assert semantic_entropy(two) == pytest.approx(math.log(2), abs=1e-9)


def test_mixture_of_opposed_corners():
    a = ClassDistribution(classes=(0, 1), probs=(1.0, 0.0))
    b = ClassDistribution(classes=(0, 1), probs=(0.0, 1.0))
    assert mixture([a, b]).probs == pytest.approx((0.5, 0.5))


def test_mixture_identity_and_mean():
    d = ClassDistribution(classes=(0, 1), probs=(0.8, 0.2))
    assert mixture([d]) == d
    e = ClassDistribution(classes=(0, 1), probs=(0.4, 0.6))
    assert mixture([d, e]).probs == pytest.approx((0.6, 0.4))


def test_mixture_aligns_by_class_id():
    d = ClassDistribution(classes=(0, 1), probs=(0.8, 0.2))
    swapped = ClassDistribution(classes=(1, 0), probs=(0.6, 0.4))
    assert mixture([d, swapped]).probs == pytest.approx((0.6, 0.4))


def test_mixture_rejects_mismatched_ids():
    d = ClassDistribution(classes=(0, 1), probs=(0.8, 0.2))
    other = ClassDistribution(classes=(0, 2), probs=(0.8, 0.2))
    with pytest.raises(ClassIdMismatch):
        mixture([d, other])


def test_mixture_entropy_at_least_mean_entropy_property():
    # concavity of entropy
    rng = np.random.default_rng(31)
    for _ in range(200):
        k = int(rng.integers(2, 6))
        cds = [
            ClassDistribution(classes=tuple(range(k)), probs=tuple(rng.dirichlet(np.ones(k))))
            for _ in range(int(rng.integers(2, 6)))
        ]
        mean_h = sum(semantic_entropy(cd) for cd in cds) / len(cds)
        assert entropy(mixture(cds)) >= mean_h - 1e-12


def test_set_objective_corner_distributions():
    w = ObjectiveWeights(alpha=1.0, gamma=1.0)
    cds = [
        ClassDistribution(classes=(0, 1), probs=(1.0, 0.0)),
        ClassDistribution(classes=(0, 1), probs=(0.0, 1.0)),
    ]
    assert set_objective(cds, w, div=0.0) == pytest.approx(math.log(2), abs=1e-9)


def test_set_objective_single_member_cancels():
    w = ObjectiveWeights(alpha=1.0, gamma=1.0)
    cds = [ClassDistribution(classes=(0, 1), probs=(0.5, 0.5))]
    assert set_objective(cds, w, div=0.0) == pytest.approx(0.0, abs=1e-12)


def test_set_objective_with_diversity_bonus():
    w = ObjectiveWeights(alpha=1.0, gamma=2.0)
    cds = [
        ClassDistribution(classes=(0, 1), probs=(1.0, 0.0)),
        ClassDistribution(classes=(0, 1), probs=(0.0, 1.0)),
    ]
    assert set_objective(cds, w, div=0.5) == pytest.approx(math.log(2) + 1.0, abs=1e-9)


def test_set_objective_rejects_negative_div():
    w = ObjectiveWeights()
    cds = [ClassDistribution(classes=(0,), probs=(1.0,))]
    with pytest.raises(ValueError):
        set_objective(cds, w, div=-0.1)


def test_pairwise_diversity_identical_vectors():
    v = (1.0, 0.0, 0.0)
    assert pairwise_diversity([v, v, v]) == pytest.approx(0.0, abs=1e-12)


def test_pairwise_diversity_orthogonal_pairs():
    e1, e2, e3 = (1.0, 0.0, 0.0), (0.0, 1.0, 0.0), (0.0, 0.0, 1.0)
    assert pairwise_diversity([e1, e2]) == pytest.approx(1.0, abs=1e-12)
    # three mutually orthogonal vectors: mean of three pairwise distances
    assert pairwise_diversity([e1, e2, e3]) == pytest.approx(1.0, abs=1e-12)


def test_pairwise_diversity_single_vector_zero():
    assert pairwise_diversity([(0.0, 1.0)]) == 0.0


def test_pairwise_diversity_rejects_non_unit():
    with pytest.raises(NonUnitVector):
        pairwise_diversity([(0.5, 0.5)])


def test_pairwise_diversity_range_property():
    rng = np.random.default_rng(7)
    for _ in range(100):
        vecs = rng.normal(size=(int(rng.integers(2, 6)), 8))
        vecs /= np.linalg.norm(vecs, axis=1, keepdims=True)
        div = pairwise_diversity([tuple(v) for v in vecs])
        assert -1e-12 <= div <= 2.0 + 1e-12


def test_bayes_risk_certain_answer():
    assert bayes_risk_01([1.0, 0.0, 0.0, 0.0]) == 0.0


def test_bayes_risk_one_minus_max():
    assert bayes_risk_01([0.6, 0.3, 0.1]) == pytest.approx(0.4, abs=1e-12)
    assert bayes_risk_01([0.25] * 4) == pytest.approx(0.75, abs=1e-12)


def test_bayes_risk_accepts_posterior_carrier():
    post = AnswerPosterior.from_probs(("A", "B"), (0.9, 0.1))
    assert bayes_risk_01(post) == pytest.approx(0.1, abs=1e-12)


def test_argmax_prob_equals_argmin_risk_property():
    rng = np.random.default_rng(13)
    for _ in range(200):
        posteriors = [
            AnswerPosterior.from_probs(("A", "B", "C"), rng.dirichlet(np.ones(3)))
            for _ in range(int(rng.integers(2, 6)))
        ]
        by_prob = max(range(len(posteriors)), key=lambda i: posteriors[i].max_prob)
        by_risk = min(range(len(posteriors)), key=lambda i: bayes_risk_01(posteriors[i]))
        assert posteriors[by_prob].max_prob == pytest.approx(
            posteriors[by_risk].max_prob, abs=1e-15
        )


def test_min_entropy_not_above_mean_entropy_property():
    rng = np.random.default_rng(17)
    for _ in range(300):
        entropies = [
            entropy(rng.dirichlet(np.ones(int(rng.integers(2, 6)))))
            for _ in range(int(rng.integers(1, 7)))
        ]
        assert min(entropies) <= sum(entropies) / len(entropies) + 1e-12


def test_information_gain_values():
    assert information_gain(math.log(4), 0.0) == pytest.approx(1.386294, abs=1e-6)
    assert information_gain(0.7, 0.7) == 0.0
    assert information_gain(1.0, 0.3) == pytest.approx(0.7, abs=1e-12)


def test_information_gain_not_clamped():
    assert information_gain(0.3, 1.0) == pytest.approx(-0.7, abs=1e-12)


def test_information_gain_rejects_negative_inputs():
    with pytest.raises(NegativeEntropyInput):
        information_gain(-0.1, 0.0)
    with pytest.raises(NegativeEntropyInput):
        information_gain(0.5, -0.2)
