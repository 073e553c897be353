"""Semantic equivalence classes over policy sketches and diverse subset selection.

Clustering is single-linkage over a pairwise equivalence judge: two sketches
share a class iff they are connected by a chain of judge-true pairs, which
turns even a noisy judge into a proper equivalence relation.  Subset selection
greedily maximizes the coverage/diversity objective and then applies
single-element improving swaps until a local optimum is reached.
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import combinations
from typing import Callable, Sequence

from .core import ClassDistribution, ObjectiveWeights
from .errors import ClassIdMismatch, NotEnoughCandidates, OracleFailure
from .infomath import pairwise_diversity, set_objective

JudgeFn = Callable[[str, str], bool]


class EquivalenceOracle:
    """Pairwise semantic-equivalence judge with reflexivity and verdict caching.

    Identical strings never reach the judge, and each unordered pair is
    queried once in canonical (sorted) order, so one verdict serves both
    directions.  The wrapped judge must be safe for concurrent invocation if
    the oracle is shared across threads.
    """

    def __init__(self, judge: JudgeFn) -> None:
        self._judge = judge
        self._verdicts: dict[tuple[str, str], bool] = {}

    def equivalent(self, a: str, b: str) -> bool:
        if a == b:
            return True
        key = (a, b) if a <= b else (b, a)
        if key not in self._verdicts:
            try:
                self._verdicts[key] = bool(self._judge(*key))
            except Exception as exc:
                raise OracleFailure(f"equivalence judge failed: {exc}") from exc
        return self._verdicts[key]


def exact_match_oracle() -> EquivalenceOracle:
    """Oracle that treats only byte-identical texts as equivalent."""
    return EquivalenceOracle(lambda a, b: a == b)


def cluster(policies: Sequence[str], oracle: EquivalenceOracle) -> tuple[list[int], int]:
    """Single-linkage partition of policy texts into equivalence classes.

    Returns one class id per policy plus the class count; ids are dense
    0..K-1 in order of first appearance.
    """
    if not policies:
        raise NotEnoughCandidates("no policies to cluster")
    parent = list(range(len(policies)))

    def find(i: int) -> int:
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    for i, j in combinations(range(len(policies)), 2):
        if find(i) != find(j) and oracle.equivalent(policies[i], policies[j]):
            parent[find(j)] = find(i)

    ids: dict[int, int] = {}
    labels = []
    for i in range(len(policies)):
        root = find(i)
        if root not in ids:
            ids[root] = len(ids)
        labels.append(ids[root])
    return labels, len(ids)


@dataclass(frozen=True)
class GlobalClasses:
    """The global equivalence classes M, as member texts per class id."""

    members: tuple[tuple[str, ...], ...]

    @property
    def count(self) -> int:
        return len(self.members)

    @property
    def class_ids(self) -> tuple[int, ...]:
        return tuple(range(self.count))

    @classmethod
    def from_texts(cls, texts: Sequence[str], oracle: EquivalenceOracle) -> "GlobalClasses":
        labels, k = cluster(texts, oracle)
        grouped: list[list[str]] = [[] for _ in range(k)]
        for text, label in zip(texts, labels):
            grouped[label].append(text)
        return cls(members=tuple(tuple(g) for g in grouped))

    def assign(self, text: str, oracle: EquivalenceOracle) -> int | None:
        """Class id of ``text``: exact membership first, then judge fallback."""
        for class_id, group in enumerate(self.members):
            if text in group:
                return class_id
        for class_id, group in enumerate(self.members):
            if any(oracle.equivalent(text, member) for member in group):
                return class_id
        return None


@dataclass(frozen=True)
class ClassProfileEstimate:
    """Empirical class distribution of one sketch, from sampled restatements."""

    sketch_index: int
    distribution: ClassDistribution
    sample_count: int

    def __post_init__(self) -> None:
        if self.sample_count < 1:
            raise NotEnoughCandidates("profile needs at least one sample")


def estimate_class_profile(
    samples: Sequence[str],
    oracle: EquivalenceOracle,
    global_classes: GlobalClasses,
    *,
    sketch_index: int = 0,
) -> ClassProfileEstimate:
    """Frequency of each global class among a sketch's samples.

    Classes with no samples get probability 0.  Samples must each be
    assignable to a global class; build the classes from the pooled samples
    to guarantee this.
    """
    if not samples:
        raise NotEnoughCandidates("profile needs at least one sample")
    counts = [0] * global_classes.count
    for sample in samples:
        assigned = global_classes.assign(sample, oracle)
        if assigned is None:
            raise ClassIdMismatch(f"sample not equivalent to any global class: {sample[:80]!r}")
        counts[assigned] += 1
    n = len(samples)
    return ClassProfileEstimate(
        sketch_index=sketch_index,
        distribution=ClassDistribution(
            classes=global_classes.class_ids, probs=tuple(c / n for c in counts)
        ),
        sample_count=n,
    )


@dataclass(frozen=True)
class SketchCandidate:
    """A selectable candidate: the sketch, its class profile, its unit vector."""

    sketch: object
    profile: ClassDistribution
    vector: tuple[float, ...]


def _objective(
    chosen: Sequence[int], candidates: Sequence[SketchCandidate], w: ObjectiveWeights
) -> float:
    div = pairwise_diversity([candidates[i].vector for i in chosen])
    return set_objective([candidates[i].profile for i in chosen], w, div)


def select_diverse_subset(
    candidates: Sequence[SketchCandidate], n: int, w: ObjectiveWeights
) -> tuple[int, ...]:
    """Pick ``n`` candidate indices greedily maximizing the set objective.

    Greedy forward selection with ties broken toward the lowest index, then
    improving exchanges until none exists: single-element swaps first, and
    pair exchanges only once no single swap helps (the diversity term is not
    submodular, so single swaps alone occasionally strand the search well
    below the optimum).  The result is locally optimal under single swaps
    and deterministic for a fixed input order.
    """
    if n < 1:
        raise NotEnoughCandidates(f"need n >= 1, got {n}")
    if len(candidates) < n:
        raise NotEnoughCandidates(f"need at least {n} candidates, got {len(candidates)}")

    selected: list[int] = []
    remaining = list(range(len(candidates)))
    for _ in range(n):
        best_idx = -1
        best_val = -float("inf")
        for idx in remaining:
            val = _objective(selected + [idx], candidates, w)
            if val > best_val:
                best_val, best_idx = val, idx
        selected.append(best_idx)
        remaining.remove(best_idx)

    # Exchange post-pass; strict increase guarantees termination.
    current = _objective(selected, candidates, w)
    improved = True
    while improved:
        improved = False
        best_val = current
        best_single: tuple[int, int] | None = None
        for out_idx in sorted(selected):
            pos = selected.index(out_idx)
            for in_idx in sorted(remaining):
                trial = list(selected)
                trial[pos] = in_idx
                val = _objective(trial, candidates, w)
                if val > best_val:
                    best_val = val
                    best_single = (pos, in_idx)
        if best_single is not None:
            pos, in_idx = best_single
            remaining.append(selected[pos])
            remaining.remove(in_idx)
            selected[pos] = in_idx
            current = best_val
            improved = True
            continue
        if n < 2 or len(remaining) < 2:
            break
        best_pair: tuple[tuple[int, int], tuple[int, int]] | None = None
        for p1, p2 in combinations(range(n), 2):
            for in1, in2 in combinations(sorted(remaining), 2):
                trial = list(selected)
                trial[p1], trial[p2] = in1, in2
                val = _objective(trial, candidates, w)
                if val > best_val:
                    best_val = val
                    best_pair = ((p1, p2), (in1, in2))
        if best_pair is not None:
            (p1, p2), (in1, in2) = best_pair
            remaining.extend([selected[p1], selected[p2]])
            remaining.remove(in1)
            remaining.remove(in2)
            selected[p1], selected[p2] = in1, in2
            current = best_val
            improved = True

    return tuple(sorted(selected))
