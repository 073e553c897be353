"""Scalar information-theoretic quantities used throughout the pipeline.

Pure functions over validated probability vectors: Shannon entropy, semantic
entropy over equivalence classes, mixture entropy, the diversity-regularized
policy-set objective, 0-1 Bayes risk, and information gain.  All entropies
are in nats.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

from .core import (
    AnswerPosterior,
    ClassDistribution,
    ObjectiveWeights,
    _entropy_nats,
    normalize_probs,
)
from .errors import ClassIdMismatch, NegativeEntropyInput, NonUnitVector

#: maximum |1 - ||v||_2| accepted by pairwise_diversity
UNIT_NORM_ATOL = 1e-6


@dataclass(frozen=True)
class Distribution:
    """A bare probability vector with validation on construction."""

    probs: tuple[float, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "probs", normalize_probs(self.probs))

    def __len__(self) -> int:
        return len(self.probs)

    @classmethod
    def of(cls, probs: Sequence[float]) -> "Distribution":
        return cls(probs=tuple(probs))


def _as_probs(dist: Distribution | ClassDistribution | AnswerPosterior | Sequence[float]) -> tuple[float, ...]:
    if isinstance(dist, (Distribution, ClassDistribution, AnswerPosterior)):
        return dist.probs
    return normalize_probs(dist)


def entropy(dist: Distribution | ClassDistribution | AnswerPosterior | Sequence[float]) -> float:
    """Shannon entropy -sum(p * ln p) with 0*ln(0) := 0.

    Accepts any of the package's distribution carriers or a raw probability
    sequence; raw sequences are validated first.  The result lies in
    [0, ln(len)].
    """
    return _entropy_nats(_as_probs(dist))


def semantic_entropy(cd: ClassDistribution) -> float:
    """Entropy of the distribution over semantic equivalence classes."""
    return _entropy_nats(cd.probs)


def mixture(cds: Sequence[ClassDistribution]) -> ClassDistribution:
    """Uniform average of class distributions defined over the same class ids.

    Inputs may list their classes in different orders; the result uses the
    first distribution's class order.
    """
    if not cds:
        raise ClassIdMismatch("mixture of zero distributions")
    base = cds[0].classes
    base_set = set(base)
    for cd in cds[1:]:
        if set(cd.classes) != base_set:
            raise ClassIdMismatch(
                f"class ids differ: {sorted(map(str, base_set))} vs "
                f"{sorted(map(str, cd.classes))}"
            )
    n = len(cds)
    averaged = tuple(math.fsum(cd.prob_of(c) for cd in cds) / n for c in base)
    return ClassDistribution(classes=base, probs=averaged)


def set_objective(
    cds: Sequence[ClassDistribution], w: ObjectiveWeights, div: float
) -> float:
    """Coverage-minus-peakedness objective with a diversity bonus.

    H(mean of the distributions) - alpha * mean(H_i) + gamma * div.  Larger is
    better: high mixture entropy rewards set-level coverage, low per-member
    entropy rewards individually decisive sketches, and ``div`` rewards
    spread in embedding space.
    """
    if not cds:
        raise ClassIdMismatch("objective over zero distributions")
    if div < 0.0:
        raise ValueError(f"div must be >= 0, got {div!r}")
    mean_member_entropy = math.fsum(semantic_entropy(cd) for cd in cds) / len(cds)
    return entropy(mixture(cds)) - w.alpha * mean_member_entropy + w.gamma * div


def pairwise_diversity(vectors: Sequence[Sequence[float]]) -> float:
    """Mean cosine distance (1 - dot) over unordered pairs of unit vectors.

    A single vector has diversity 0.  Vectors must be unit L2 norm within
    1e-6.  The result lies in [0, 2].
    """
    if not vectors:
        raise NonUnitVector("no vectors given")
    vecs = [tuple(float(x) for x in v) for v in vectors]
    for i, v in enumerate(vecs):
        norm = math.sqrt(math.fsum(x * x for x in v))
        if abs(norm - 1.0) > UNIT_NORM_ATOL:
            raise NonUnitVector(f"vector {i} has norm {norm!r}, expected 1")
    if len(vecs) == 1:
        return 0.0
    total = 0.0
    pairs = 0
    for i in range(len(vecs)):
        for j in range(i + 1, len(vecs)):
            dot = math.fsum(a * b for a, b in zip(vecs[i], vecs[j]))
            # roundoff can push |dot| a hair past 1; distances live in [0, 2]
            total += min(2.0, max(0.0, 1.0 - dot))
            pairs += 1
    return total / pairs


def bayes_risk_01(p: AnswerPosterior | Sequence[float]) -> float:
    """Bayes risk under 0-1 loss: 1 - max posterior probability."""
    return 1.0 - max(_as_probs(p))


def information_gain(prior_entropy: float, conditional_entropy: float) -> float:
    """prior_entropy - conditional_entropy, unclamped.

    Empirical estimates may be negative; the sign is reported as-is since
    nonnegativity holds only for the true quantities.
    """
    if prior_entropy < 0.0 or conditional_entropy < 0.0:
        raise NegativeEntropyInput(
            f"entropies must be >= 0, got {prior_entropy!r}, {conditional_entropy!r}"
        )
    return prior_entropy - conditional_entropy
