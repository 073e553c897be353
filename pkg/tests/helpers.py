"""Factories shared across test modules."""

from __future__ import annotations

from intentsketch.backends import BackendPool, MockBackend
from intentsketch.core import OmniInput, Option


def make_item(
    item_id: str = "item-1",
    query: str = "What is the speaker doing?",
    labels: tuple[str, ...] = ("A", "B", "C", "D"),
    gold: str | None = "B",
    video: str | None = "clip.mp4",
    audio: str | None = "clip.wav",
) -> OmniInput:
    texts = ("cooking", "singing", "running", "reading", "waiting", "typing")
    return OmniInput(
        id=item_id,
        query=query,
        options=tuple(Option(lab, texts[i % len(texts)]) for i, lab in enumerate(labels)),
        gold=gold,
        video=video,
        audio=audio,
    )


def scripted_cg_mock(
    posteriors: dict[str, list[float]],
    answer: str = "B",
    intent_text: str = "The question asks for the ongoing activity.",
) -> MockBackend:
    """Mock covering a full CG run in first_n mode with three sketches.

    ``posteriors`` maps emphasis-tag keywords ("evidence", "temporal",
    "cross") to the scripted answer posterior of the sketch generated under
    that tag.
    """
    sketch_texts = {
        "evidence": "Inspect the key visual evidence first, then corroborate with audio.",
        "temporal": "Trace the order of events and what causes what.",
        "cross": "Align the audio track against the visuals before deciding.",
    }
    mock = MockBackend()
    mock.script_complete(r"intent analyst", intent_text)
    mock.script_complete(r"Emphasis: evidence-first", sketch_texts["evidence"])
    mock.script_complete(r"Emphasis: temporal/causal-first", sketch_texts["temporal"])
    mock.script_complete(r"Emphasis: cross-modal-alignment-first", sketch_texts["cross"])
    for tag, probs in posteriors.items():
        mock.script_posterior(sketch_texts[tag].split(",")[0], {"probs": probs})
    mock.script_complete(r"Reason carefully", f"Looking closely...\nANSWER: {answer}")
    return mock


def pool_of(mock: MockBackend) -> BackendPool:
    return BackendPool(default=mock)
