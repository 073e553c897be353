from __future__ import annotations

import json
import math

import pytest

from intentsketch.core import (
    AnswerPosterior,
    ClassDistribution,
    Conditioning,
    IntentRepresentation,
    ObjectiveWeights,
    OmniInput,
    Option,
    PolicySketch,
    PosteriorSource,
    ReasoningOutcome,
    normalize_probs,
    validate_input,
)
from intentsketch.errors import (
    DuplicateSlotLabel,
    EmptyQuery,
    GoldNotInOptions,
    InvalidDistribution,
    InvalidOptions,
    ValidationError,
)


def test_validate_input_minimal_valid_item():
    item = OmniInput(id="x", query="q", options=(Option("A"), Option("B")), gold="A")
    assert validate_input(item) is item


def test_validate_input_empty_query():
    with pytest.raises(EmptyQuery):
        validate_input(OmniInput(id="x", query="", options=(Option("A"), Option("B"))))


def test_validate_input_duplicate_labels():
    with pytest.raises(DuplicateSlotLabel):
        validate_input(OmniInput(id="x", query="q", options=(Option("A"), Option("A"))))


def test_validate_input_gold_must_be_an_option():
    with pytest.raises(GoldNotInOptions):
        validate_input(OmniInput(id="x", query="q", options=(Option("A"), Option("B")), gold="C"))


def test_validate_input_single_option_rejected():
    with pytest.raises(InvalidOptions):
        validate_input(OmniInput(id="x", query="q", options=(Option("A"),)))


def test_validate_input_free_form_ok():
    item = OmniInput(id="x", query="describe the scene")
    assert validate_input(item) is item


def test_omni_input_wire_round_trip_preserves_unknown_keys():
    wire = {
        "id": "v1",
        "query": "what happens next?",
        "options": [{"label": "A", "text": "rain"}, {"label": "B", "text": "sun"}],
        "gold": "B",
        "video": "v.mp4",
        "audio": None,
        "meta": {"split": "dev"},
        "source_row": 17,
    }
    item = OmniInput.from_dict(wire)
    assert item.meta == {"split": "dev", "source_row": 17}
    again = OmniInput.from_dict(json.loads(json.dumps(item.to_dict())))
    assert again == item


@pytest.mark.parametrize(
    "value",
    [
        IntentRepresentation(text="find the goal", source_backend="b1", token_count=3),
        ClassDistribution(classes=(0, 1, 2), probs=(0.2, 0.5, 0.3)),
        PolicySketch(index=1, text="check audio first", emphasis_tag="evidence-first"),
        PolicySketch(
            index=0,
            text="compare frames",
            class_profile=ClassDistribution(classes=(0, 1), probs=(0.75, 0.25)),
        ),
        AnswerPosterior.from_probs(("A", "B"), (0.7, 0.3), PosteriorSource.SAMPLED),
        Conditioning(text="prefer concrete evidence"),
        ReasoningOutcome(
            answer="B", trace="...ANSWER: B", selected_sketch_index=1,
            per_candidate_entropies=(0.9, 0.2),
        ),
        ObjectiveWeights(alpha=0.5, gamma=2.0),
    ],
)
def test_core_types_json_round_trip(value):
    encoded = json.loads(json.dumps(value.to_dict()))
    assert type(value).from_dict(encoded) == value


def test_normalize_probs_renormalizes_small_drift():
    probs = normalize_probs([0.5, 0.5 + 5e-7])
    assert math.isclose(sum(probs), 1.0, abs_tol=1e-12)


def test_normalize_probs_rejects_large_drift():
    with pytest.raises(InvalidDistribution):
        normalize_probs([0.5, 0.6])


def test_normalize_probs_rejects_negative_and_empty():
    with pytest.raises(InvalidDistribution):
        normalize_probs([1.2, -0.2])
    with pytest.raises(InvalidDistribution):
        normalize_probs([])


def test_answer_posterior_entropy_consistency_enforced():
    with pytest.raises(InvalidDistribution):
        AnswerPosterior(slots=("A", "B"), probs=(0.5, 0.5), entropy_nats=0.1, source="logprob")


def test_answer_posterior_from_probs_entropy_bounds():
    post = AnswerPosterior.from_probs(("A", "B", "C", "D"), (0.25, 0.25, 0.25, 0.25))
    assert post.entropy_nats == pytest.approx(math.log(4), abs=1e-12)
    assert post.entropy_nats <= math.log(len(post.slots)) + 1e-9
    assert post.top_slot == "A"
    assert post.max_prob == pytest.approx(0.25)


def test_answer_posterior_duplicate_slots_rejected():
    with pytest.raises(DuplicateSlotLabel):
        AnswerPosterior.from_probs(("A", "A"), (0.5, 0.5))


def test_class_distribution_requires_matching_lengths():
    with pytest.raises(InvalidDistribution):
        ClassDistribution(classes=(0, 1), probs=(1.0,))


def test_objective_weights_must_be_positive():
    with pytest.raises(ValidationError):
        ObjectiveWeights(alpha=0.0, gamma=1.0)
    with pytest.raises(ValidationError):
        ObjectiveWeights(alpha=1.0, gamma=-2.0)


def test_policy_sketch_rejects_blank_text():
    with pytest.raises(ValidationError):
        PolicySketch(index=0, text="   ")
