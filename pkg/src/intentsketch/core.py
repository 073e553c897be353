"""Shared domain types for the intent-sketch reasoning pipeline.

All types are immutable values, safe to share across concurrent tasks, and
JSON round-trippable via ``to_dict`` / ``from_dict``.  Every entropy in the
package is measured in nats.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Iterable, Mapping, Sequence

from .errors import (
    DuplicateSlotLabel,
    EmptyQuery,
    GoldNotInOptions,
    InvalidDistribution,
    InvalidOptions,
    ValidationError,
)

#: |sum(probs) - 1| after renormalization must stay below this.
NORMALIZATION_ATOL = 1e-9
#: Inputs whose mass is off by more than this are rejected outright.
RENORMALIZATION_ATOL = 1e-6


def _entropy_nats(probs: Iterable[float]) -> float:
    """Shannon entropy in nats with the 0*log(0) := 0 convention.

    Assumes an already-validated probability vector; the public, validating
    entry point is ``infomath.entropy``.
    """
    return -math.fsum(p * math.log(p) for p in probs if p > 0.0)


def normalize_probs(probs: Sequence[float], *, what: str = "distribution") -> tuple[float, ...]:
    """Validate a probability vector, renormalizing small mass drift.

    Vectors whose total mass is within 1e-6 of 1 are rescaled exactly;
    anything further off, empty, negative, or non-finite is rejected.
    """
    if len(probs) == 0:
        raise InvalidDistribution(f"{what}: empty probability vector")
    vals = [float(p) for p in probs]
    for p in vals:
        if not math.isfinite(p) or p < 0.0:
            raise InvalidDistribution(
                f"{what}: probabilities must be finite and nonnegative, got {p!r}"
            )
    total = math.fsum(vals)
    if abs(total - 1.0) > RENORMALIZATION_ATOL:
        raise InvalidDistribution(f"{what}: total mass {total!r} not within 1e-06 of 1")
    return tuple(p / total for p in vals)


# -- question input -----------------------------------------------------------

@dataclass(frozen=True)
class Option:
    """One answer slot: a label (e.g. "A") and its option text."""

    label: str
    text: str = ""

    def to_dict(self) -> dict[str, str]:
        return {"label": self.label, "text": self.text}

    @classmethod
    def from_dict(cls, obj: Mapping[str, Any]) -> "Option":
        return cls(label=str(obj["label"]), text=str(obj.get("text", "")))


@dataclass(frozen=True)
class OmniInput:
    """One question: opaque media references plus the textual query and options.

    Media are never decoded locally; the references are forwarded verbatim to
    whichever backend consumes them.
    """

    id: str
    query: str
    options: tuple[Option, ...] = ()
    gold: str | None = None
    video: str | None = None
    audio: str | None = None
    meta: dict[str, Any] = field(default_factory=dict)

    @property
    def labels(self) -> tuple[str, ...]:
        return tuple(o.label for o in self.options)

    def to_dict(self) -> dict[str, Any]:
        return {
            "id": self.id,
            "query": self.query,
            "options": [o.to_dict() for o in self.options],
            "gold": self.gold,
            "video": self.video,
            "audio": self.audio,
            "meta": dict(self.meta),
        }

    @classmethod
    def from_dict(cls, obj: Mapping[str, Any]) -> "OmniInput":
        """Parse the JSONL wire shape; unknown keys are preserved in ``meta``."""
        known = {"id", "query", "options", "gold", "video", "audio", "meta"}
        meta = dict(obj.get("meta") or {})
        for key in obj.keys() - known:
            meta[key] = obj[key]
        return cls(
            id=str(obj.get("id", "")),
            query=str(obj.get("query", "")),
            options=tuple(Option.from_dict(o) for o in obj.get("options") or ()),
            gold=None if obj.get("gold") is None else str(obj["gold"]),
            video=None if obj.get("video") is None else str(obj["video"]),
            audio=None if obj.get("audio") is None else str(obj["audio"]),
            meta=meta,
        )


def validate_input(item: OmniInput) -> OmniInput:
    """Check the OmniInput invariants, returning the item unchanged when valid.

    Options must be empty (free-form question) or at least two with unique
    labels; a gold label, when present, must name one of the options.
    """
    if not item.query.strip():
        raise EmptyQuery(f"item {item.id!r}: query is empty")
    if len(item.options) == 1:
        raise InvalidOptions(f"item {item.id!r}: need zero or >= 2 options, got 1")
    labels = item.labels
    if len(set(labels)) != len(labels):
        dupes = sorted({l for l in labels if labels.count(l) > 1})
        raise DuplicateSlotLabel(f"item {item.id!r}: duplicate option labels {dupes}")
    if item.gold is not None and item.options and item.gold not in labels:
        raise GoldNotInOptions(f"item {item.id!r}: gold {item.gold!r} not among {list(labels)}")
    return item


# -- pipeline intermediates -----------------------------------------------------

@dataclass(frozen=True)
class IntentRepresentation:
    """Textual intent summary conditioning the downstream stages."""

    text: str
    source_backend: str = ""
    token_count: int = 0

    def __post_init__(self) -> None:
        if self.token_count < 0:
            raise ValidationError("token_count must be >= 0")

    @classmethod
    def empty(cls) -> "IntentRepresentation":
        return cls(text="", source_backend="", token_count=0)

    def to_dict(self) -> dict[str, Any]:
        return {
            "text": self.text,
            "source_backend": self.source_backend,
            "token_count": self.token_count,
        }

    @classmethod
    def from_dict(cls, obj: Mapping[str, Any]) -> "IntentRepresentation":
        return cls(
            text=str(obj["text"]),
            source_backend=str(obj.get("source_backend", "")),
            token_count=int(obj.get("token_count", 0)),
        )


@dataclass(frozen=True)
class ClassDistribution:
    """A distribution over semantic equivalence classes."""

    classes: tuple[Any, ...]
    probs: tuple[float, ...]

    def __post_init__(self) -> None:
        if len(self.classes) != len(self.probs):
            raise InvalidDistribution(
                f"class/prob length mismatch: {len(self.classes)} vs {len(self.probs)}"
            )
        if len(set(self.classes)) != len(self.classes):
            raise InvalidDistribution("class ids must be unique")
        object.__setattr__(self, "classes", tuple(self.classes))
        object.__setattr__(self, "probs", normalize_probs(self.probs, what="class distribution"))

    def prob_of(self, class_id: Any) -> float:
        try:
            return self.probs[self.classes.index(class_id)]
        except ValueError:
            return 0.0

    def to_dict(self) -> dict[str, Any]:
        return {"classes": list(self.classes), "probs": list(self.probs)}

    @classmethod
    def from_dict(cls, obj: Mapping[str, Any]) -> "ClassDistribution":
        return cls(classes=tuple(obj["classes"]), probs=tuple(obj["probs"]))


@dataclass(frozen=True)
class PolicySketch:
    """One candidate strategy sketch: a line of reasoning, never an answer."""

    index: int
    text: str
    emphasis_tag: str | None = None
    class_profile: ClassDistribution | None = None

    def __post_init__(self) -> None:
        if self.index < 0:
            raise ValidationError("sketch index must be >= 0")
        if not self.text.strip():
            raise ValidationError("sketch text is empty")

    def to_dict(self) -> dict[str, Any]:
        return {
            "index": self.index,
            "text": self.text,
            "emphasis_tag": self.emphasis_tag,
            "class_profile": None if self.class_profile is None else self.class_profile.to_dict(),
        }

    @classmethod
    def from_dict(cls, obj: Mapping[str, Any]) -> "PolicySketch":
        profile = obj.get("class_profile")
        return cls(
            index=int(obj["index"]),
            text=str(obj["text"]),
            emphasis_tag=obj.get("emphasis_tag"),
            class_profile=None if profile is None else ClassDistribution.from_dict(profile),
        )


class PosteriorSource(str, Enum):
    """How an answer posterior was obtained from the backend."""

    LOGPROB = "logprob"
    SAMPLED = "sampled"


@dataclass(frozen=True)
class AnswerPosterior:
    """Distribution over answer slots together with its entropy in nats."""

    slots: tuple[str, ...]
    probs: tuple[float, ...]
    entropy_nats: float
    source: PosteriorSource

    def __post_init__(self) -> None:
        object.__setattr__(self, "slots", tuple(self.slots))
        if len(self.slots) != len(self.probs):
            raise InvalidDistribution(
                f"slot/prob length mismatch: {len(self.slots)} vs {len(self.probs)}"
            )
        if len(set(self.slots)) != len(self.slots):
            raise DuplicateSlotLabel(f"duplicate slots in posterior: {list(self.slots)}")
        object.__setattr__(self, "probs", normalize_probs(self.probs, what="answer posterior"))
        object.__setattr__(self, "source", PosteriorSource(self.source))
        h = _entropy_nats(self.probs)
        if abs(self.entropy_nats - h) > NORMALIZATION_ATOL:
            raise InvalidDistribution(
                f"entropy_nats {self.entropy_nats!r} inconsistent with probs (expected {h!r})"
            )
        if self.entropy_nats > math.log(len(self.slots)) + NORMALIZATION_ATOL:
            raise InvalidDistribution("entropy exceeds log of slot count")

    @classmethod
    def from_probs(
        cls,
        slots: Sequence[str],
        probs: Sequence[float],
        source: PosteriorSource | str = PosteriorSource.LOGPROB,
    ) -> "AnswerPosterior":
        normalized = normalize_probs(probs, what="answer posterior")
        return cls(
            slots=tuple(slots),
            probs=normalized,
            entropy_nats=_entropy_nats(normalized),
            source=PosteriorSource(source),
        )

    @property
    def max_prob(self) -> float:
        return max(self.probs)

    @property
    def top_slot(self) -> str:
        return self.slots[self.probs.index(self.max_prob)]

    def to_dict(self) -> dict[str, Any]:
        return {
            "slots": list(self.slots),
            "probs": list(self.probs),
            "entropy_nats": self.entropy_nats,
            "source": self.source.value,
        }

    @classmethod
    def from_dict(cls, obj: Mapping[str, Any]) -> "AnswerPosterior":
        return cls(
            slots=tuple(obj["slots"]),
            probs=tuple(obj["probs"]),
            entropy_nats=float(obj["entropy_nats"]),
            source=PosteriorSource(obj["source"]),
        )


@dataclass(frozen=True)
class Conditioning:
    """Extra task conditioning text; free-form and may be empty."""

    text: str = ""

    def to_dict(self) -> dict[str, str]:
        return {"text": self.text}

    @classmethod
    def from_dict(cls, obj: Mapping[str, Any]) -> "Conditioning":
        return cls(text=str(obj.get("text", "")))


@dataclass(frozen=True)
class ReasoningOutcome:
    """Final pipeline output: the answer plus its reasoning trace.

    ``per_candidate_entropies`` covers the candidates the selector actually
    scored; it is empty when selection was skipped or short-circuited
    (single-sketch and no-pipeline runs).  ``selected_sketch_index`` is -1
    when no sketch was used.
    """

    answer: str
    trace: str
    selected_sketch_index: int
    per_candidate_entropies: tuple[float, ...] = ()

    def __post_init__(self) -> None:
        object.__setattr__(
            self, "per_candidate_entropies", tuple(float(h) for h in self.per_candidate_entropies)
        )

    def to_dict(self) -> dict[str, Any]:
        return {
            "answer": self.answer,
            "trace": self.trace,
            "selected_sketch_index": self.selected_sketch_index,
            "per_candidate_entropies": list(self.per_candidate_entropies),
        }

    @classmethod
    def from_dict(cls, obj: Mapping[str, Any]) -> "ReasoningOutcome":
        return cls(
            answer=str(obj["answer"]),
            trace=str(obj.get("trace", "")),
            selected_sketch_index=int(obj["selected_sketch_index"]),
            per_candidate_entropies=tuple(obj.get("per_candidate_entropies", ())),
        )


@dataclass(frozen=True)
class ObjectiveWeights:
    """Weights of the diversity-regularized policy-set objective."""

    alpha: float = 0.5
    gamma: float = 1.0

    def __post_init__(self) -> None:
        if not (self.alpha > 0.0 and self.gamma > 0.0):
            raise ValidationError(
                f"alpha and gamma must be strictly positive, got {self.alpha}, {self.gamma}"
            )

    def to_dict(self) -> dict[str, float]:
        return {"alpha": self.alpha, "gamma": self.gamma}

    @classmethod
    def from_dict(cls, obj: Mapping[str, Any]) -> "ObjectiveWeights":
        return cls(alpha=float(obj.get("alpha", 0.5)), gamma=float(obj.get("gamma", 1.0)))
