"""The three serial front-end stages plus the reasoning-engine adapter.

Stage flow per ablation:

  CG        perceive intent -> generate sketches -> select -> solve
  Abl_NI    generate (empty intent) -> select -> solve
  Abl_SP    perceive intent -> generate one sketch -> selector short-circuits -> solve
  BaseLine  solve only (no front-end, exactly one backend call)

Selection picks the sketch whose answer posterior has minimum entropy; ties go
to the higher max-probability (the 0-1 Bayes-risk argmax form), then to the
lowest index.
"""

from __future__ import annotations

import dataclasses
import json
import re
import string
import threading
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Any, Callable, Mapping, Sequence

from . import infomath
from .backends.base import Backend, BackendPool, BackendRequest, RequestParams, prompt_digest
from .backends.base import judge_equivalence
from .core import (
    AnswerPosterior,
    Conditioning,
    IntentRepresentation,
    ObjectiveWeights,
    OmniInput,
    PolicySketch,
    PosteriorSource,
    ReasoningOutcome,
    validate_input,
)
from .errors import (
    AllSketchesRejected,
    BackendError,
    ConfigError,
    EmptyCompletion,
    IntentSketchError,
    StageError,
    UnparseableAnswer,
)
from .policyset import (
    EquivalenceOracle,
    GlobalClasses,
    SketchCandidate,
    estimate_class_profile,
    select_diverse_subset,
)

EMPHASIS_TAGS = ("evidence-first", "temporal/causal-first", "cross-modal-alignment-first")

#: sentinel selected_sketch_index when no sketch was used (BaseLine)
NO_SKETCH = -1


class AblationId(str, Enum):
    CG = "CG"
    ABL_NI = "Abl_NI"
    ABL_SP = "Abl_SP"
    BASELINE = "BaseLine"


# -- prompt templates ---------------------------------------------------------

DEFAULT_PERCEIVER_TEMPLATE = (
    "You are an intent analyst for multimodal questions.\n"
    "{media_note}Question: {query}\n"
    "{options}"
    "In 2-4 sentences, state what the question is really asking for: the\n"
    "underlying goal, the evidence that matters, and any constraints.\n"
    "Do not answer the question."
)

DEFAULT_GENERATOR_TEMPLATE = (
    "You are a strategy planner for multimodal questions.\n"
    "{media_note}Question: {query}\n"
    "{options}"
    "{intent}"
    "Emphasis: {emphasis}.\n"
    "Write one short reasoning strategy (2-4 sentences) describing how to reach\n"
    "the answer: which evidence to gather first and how to combine it.\n"
    "Do not state or imply any final answer choice."
)

DEFAULT_SELECTOR_TEMPLATE = (
    "{media_note}Question: {query}\n"
    "{options}"
    "{sketch}"
    "{conditioning}"
    "Following the strategy above, pick the best option. Reply with the option\n"
    "label only.\n"
    "ANSWER:"
)

DEFAULT_REASONER_TEMPLATE = (
    "{media_note}Question: {query}\n"
    "{options}"
    "{intent}"
    "{sketch}"
    "{conditioning}"
    "Reason carefully step by step, then give your final answer on the last\n"
    "line in exactly this form:\n"
    "ANSWER: <label>"
)

RESTATE_TEMPLATE = (
    "Restate this reasoning strategy in one short sentence, preserving its\n"
    "meaning.\nStrategy: {sketch}\nRestatement:"
)

REPAIR_SUFFIX = (
    "\n\nYour previous reply could not be parsed. Reply again with only the\n"
    "final line in exactly this form:\nANSWER: <label>"
)

_ALLOWED_PLACEHOLDERS = {
    "perceiver": {"query", "options", "media_note"},
    "generator": {"query", "options", "media_note", "intent", "emphasis"},
    "selector": {"query", "options", "media_note", "intent", "sketch", "conditioning"},
    "reasoner": {"query", "options", "media_note", "intent", "sketch", "conditioning"},
}


def _placeholders(template: str) -> set[str]:
    return {name for _, name, _, _ in string.Formatter().parse(template) if name}


@dataclass(frozen=True)
class PromptBundle:
    """The four stage templates with named placeholders."""

    perceiver_template: str = DEFAULT_PERCEIVER_TEMPLATE
    generator_template: str = DEFAULT_GENERATOR_TEMPLATE
    selector_template: str = DEFAULT_SELECTOR_TEMPLATE
    reasoner_template: str = DEFAULT_REASONER_TEMPLATE

    def __post_init__(self) -> None:
        for stage in _ALLOWED_PLACEHOLDERS:
            template = getattr(self, f"{stage}_template")
            unknown = _placeholders(template) - _ALLOWED_PLACEHOLDERS[stage]
            if unknown:
                raise ConfigError(f"{stage} template has unknown placeholders {sorted(unknown)}")

    @classmethod
    def default(cls) -> "PromptBundle":
        return cls()

    @classmethod
    def from_dir(cls, directory: str | Path) -> "PromptBundle":
        """Load templates from perceiver.txt / generator.txt / selector.txt /
        reasoner.txt; missing files keep their defaults."""
        directory = Path(directory)
        kwargs = {}
        for stage in ("perceiver", "generator", "selector", "reasoner"):
            path = directory / f"{stage}.txt"
            if path.exists():
                kwargs[f"{stage}_template"] = path.read_text(encoding="utf-8")
        return cls(**kwargs)


# -- run configuration -----------------------------------------------------------

@dataclass(frozen=True)
class RoleBindings:
    """Backend ids per pipeline role.

    An empty ``strategy_selector`` means the selector's posterior evaluator is
    the reasoning engine itself, matching the answer-distribution subscript the
    selection objective is defined on.
    """

    intent_perceiver: str = "mock"
    policy_generator: str = "mock"
    strategy_selector: str = ""
    reasoning_engine: str = "mock"

    def selector_id(self) -> str:
        return self.strategy_selector or self.reasoning_engine

    def to_dict(self) -> dict[str, str]:
        return {
            "intent_perceiver": self.intent_perceiver,
            "policy_generator": self.policy_generator,
            "strategy_selector": self.strategy_selector,
            "reasoning_engine": self.reasoning_engine,
        }

    @classmethod
    def from_dict(cls, obj: Mapping[str, Any]) -> "RoleBindings":
        return cls(
            intent_perceiver=str(obj.get("intent_perceiver", "mock")),
            policy_generator=str(obj.get("policy_generator", "mock")),
            strategy_selector=str(obj.get("strategy_selector", "")),
            reasoning_engine=str(obj.get("reasoning_engine", "mock")),
        )


@dataclass(frozen=True)
class RunConfig:
    """Pipeline wiring: which stages run, how many sketches, which backends.

    ``policy_selection`` chooses how the final N sketches are picked from the
    oversampled pool: "objective" scores class profiles and embeddings with
    the diversity-regularized set objective; "first_n" keeps the first N in
    emphasis-tag rotation order and skips profile estimation entirely.
    """

    ablation: AblationId = AblationId.CG
    num_policies: int = 3
    oversample_factor: int = 2
    weights: ObjectiveWeights = field(default_factory=ObjectiveWeights)
    conditioning: Conditioning = field(default_factory=Conditioning)
    roles: RoleBindings = field(default_factory=RoleBindings)
    seed: int = 0
    policy_selection: str = "objective"
    restatement_samples: int = 5
    posterior_samples: int = 8

    def __post_init__(self) -> None:
        try:
            object.__setattr__(self, "ablation", AblationId(self.ablation))
        except ValueError as exc:
            raise ConfigError(f"unknown ablation {self.ablation!r}") from exc
        if self.ablation is AblationId.ABL_SP:
            object.__setattr__(self, "num_policies", 1)
        if self.num_policies < 1:
            raise ConfigError("num_policies must be >= 1")
        if self.oversample_factor < 1:
            raise ConfigError("oversample_factor must be >= 1")
        if self.policy_selection not in ("objective", "first_n"):
            raise ConfigError(f"unknown policy_selection {self.policy_selection!r}")
        if self.restatement_samples < 1 or self.posterior_samples < 1:
            raise ConfigError("sample counts must be >= 1")

    @property
    def intent_active(self) -> bool:
        return self.ablation in (AblationId.CG, AblationId.ABL_SP)

    @property
    def generation_active(self) -> bool:
        return self.ablation is not AblationId.BASELINE

    @property
    def selection_active(self) -> bool:
        return self.ablation is not AblationId.BASELINE

    def to_dict(self) -> dict[str, Any]:
        return {
            "ablation": self.ablation.value,
            "num_policies": self.num_policies,
            "oversample_factor": self.oversample_factor,
            "alpha": self.weights.alpha,
            "gamma": self.weights.gamma,
            "conditioning": self.conditioning.text,
            "roles": self.roles.to_dict(),
            "seed": self.seed,
            "policy_selection": self.policy_selection,
            "restatement_samples": self.restatement_samples,
            "posterior_samples": self.posterior_samples,
        }

    @classmethod
    def from_dict(cls, obj: Mapping[str, Any]) -> "RunConfig":
        try:
            ablation = AblationId(obj.get("ablation", "CG"))
        except ValueError as exc:
            raise ConfigError(f"unknown ablation {obj.get('ablation')!r}") from exc
        return cls(
            ablation=ablation,
            num_policies=int(obj.get("num_policies", 3)),
            oversample_factor=int(obj.get("oversample_factor", 2)),
            weights=ObjectiveWeights(
                alpha=float(obj.get("alpha", 0.5)), gamma=float(obj.get("gamma", 1.0))
            ),
            conditioning=Conditioning(text=str(obj.get("conditioning", ""))),
            roles=RoleBindings.from_dict(obj.get("roles", {})),
            seed=int(obj.get("seed", 0)),
            policy_selection=str(obj.get("policy_selection", "objective")),
            restatement_samples=int(obj.get("restatement_samples", 5)),
            posterior_samples=int(obj.get("posterior_samples", 8)),
        )


# -- prompt assembly ---------------------------------------------------------------

def _options_block(x: OmniInput) -> str:
    if not x.options:
        return ""
    lines = "\n".join(f"{o.label}. {o.text}".rstrip() for o in x.options)
    return f"Options:\n{lines}\n"


def _media_note(x: OmniInput) -> str:
    refs = []
    if x.video:
        refs.append(f"video={x.video}")
    if x.audio:
        refs.append(f"audio={x.audio}")
    return f"Media: {'; '.join(refs)}\n" if refs else ""


def _intent_block(intent: IntentRepresentation | None) -> str:
    if intent is None or not intent.text.strip():
        return ""
    return f"Intent: {intent.text}\n"


def _sketch_block(sketch: PolicySketch | None) -> str:
    if sketch is None or not sketch.text.strip():
        return ""
    return f"Strategy: {sketch.text}\n"


def _conditioning_block(c: Conditioning) -> str:
    return f"Guidance: {c.text}\n" if c.text.strip() else ""


def render_prompt(template: str, **values: str) -> str:
    try:
        return template.format(**values)
    except (KeyError, IndexError) as exc:
        raise ConfigError(f"template placeholder not supplied: {exc}") from exc


# -- answer-claim guard and trailer parsing ---------------------------------------

def violates_answer_guard(text: str, labels: Sequence[str]) -> bool:
    """True when sketch text lexically claims a final answer for the slots.

    Catches forms like "ANSWER: B", "the final answer is B", "answer = (B)".
    """
    if not labels:
        return False
    alternation = "|".join(re.escape(l) for l in labels)
    claim = re.compile(
        r"(?i)\b(?:final\s+)?answer\b\s*(?:is|:|=|-)?\s*[\(\[]?(?:" + alternation + r")(?![A-Za-z0-9])"
    )
    return claim.search(text) is not None


_TRAILER_RE = re.compile(r"(?im)^\s*ANSWER\s*:\s*(.+?)\s*$")


def parse_answer(completion: str, labels: Sequence[str]) -> str | None:
    """Parse the strict "ANSWER: <label>" trailer contract.

    For MCQ items, the trailed value must be one of the labels (canonicalized
    case-insensitively); for free-form items, any nonempty trailer counts.
    """
    matches = _TRAILER_RE.findall(completion)
    if not matches:
        return None
    tail = matches[-1].strip()
    if not labels:
        return tail or None
    cleaned = tail.strip(".()[]")
    by_lower = {l.lower(): l for l in labels}
    return by_lower.get(cleaned.lower())


# -- run log -----------------------------------------------------------------------

LogFn = Callable[[dict[str, Any]], None]


class JsonlLogger:
    """Appends one JSON object per stage event; safe for concurrent use."""

    def __init__(self, path: str | Path) -> None:
        self.path = Path(path)
        self.path.parent.mkdir(parents=True, exist_ok=True)
        self._lock = threading.Lock()

    def __call__(self, record: dict[str, Any]) -> None:
        line = json.dumps(record, sort_keys=True, ensure_ascii=False)
        with self._lock, self.path.open("a", encoding="utf-8") as fh:
            fh.write(line + "\n")


def _log(
    log: LogFn | None,
    *,
    item_id: str,
    ablation: AblationId,
    stage: str,
    backend: str,
    prompt: str = "",
    entropies: Sequence[float] = (),
    selected_index: int | None = None,
    answer: str | None = None,
) -> None:
    if log is None:
        return
    log(
        {
            "item_id": item_id,
            "ablation": ablation.value,
            "stage": stage,
            "backend": backend,
            "prompt_digest": prompt_digest(prompt)[:16] if prompt else "",
            "entropies": [float(h) for h in entropies],
            "selected_index": selected_index,
            "answer": answer,
        }
    )


# -- pipeline stages ------------------------------------------------------------------

def perceive_intent(
    x: OmniInput,
    cfg: RunConfig,
    pool: BackendPool,
    prompts: PromptBundle | None = None,
    log: LogFn | None = None,
) -> IntentRepresentation:
    """Run the intent stage: summarize what the question is really after."""
    prompts = prompts or PromptBundle.default()
    backend = pool.resolve(cfg.roles.intent_perceiver)
    prompt = render_prompt(
        prompts.perceiver_template,
        query=x.query,
        options=_options_block(x),
        media_note=_media_note(x),
    )
    req = BackendRequest(
        backend_id=backend.id,
        kind="complete",
        prompt=prompt,
        media=tuple(m for m in (x.video, x.audio) if m),
        params=RequestParams(temperature=0.0, max_tokens=256, seed=cfg.seed),
    )
    text = backend.complete(req).text.strip()
    if not text:
        raise EmptyCompletion(f"intent perceiver {backend.id} returned empty text")
    _log(log, item_id=x.id, ablation=cfg.ablation, stage="intent", backend=backend.id, prompt=prompt)
    return IntentRepresentation(
        text=text, source_backend=backend.id, token_count=len(text.split())
    )


def _request_sketches(
    x: OmniInput,
    z: IntentRepresentation | None,
    cfg: RunConfig,
    backend: Backend,
    prompts: PromptBundle,
) -> list[PolicySketch]:
    """Request the oversampled raw pool, rotating emphasis tags, and guard it."""
    raw_count = cfg.oversample_factor * cfg.num_policies
    kept: list[PolicySketch] = []
    rejected = 0
    for i in range(raw_count):
        tag = EMPHASIS_TAGS[i % len(EMPHASIS_TAGS)]
        prompt = render_prompt(
            prompts.generator_template,
            query=x.query,
            options=_options_block(x),
            media_note=_media_note(x),
            intent=_intent_block(z),
            emphasis=tag,
        )
        req = BackendRequest(
            backend_id=backend.id,
            kind="complete",
            prompt=prompt,
            media=tuple(m for m in (x.video, x.audio) if m),
            params=RequestParams(temperature=0.7, max_tokens=256, seed=cfg.seed + i),
        )
        text = backend.complete(req).text.strip()
        if not text or violates_answer_guard(text, x.labels):
            rejected += 1
            continue
        kept.append(PolicySketch(index=len(kept), text=text, emphasis_tag=tag))
    if len(kept) < cfg.num_policies:
        raise AllSketchesRejected(
            f"answer guard kept {len(kept)} of {raw_count} sketches,"
            f" need {cfg.num_policies}"
        )
    return kept


def _profile_candidates(
    sketches: Sequence[PolicySketch],
    cfg: RunConfig,
    backend: Backend,
) -> list[SketchCandidate]:
    """Estimate per-sketch class profiles from sampled restatements.

    All restatements are pooled and clustered into the global classes M, so
    every sample is assignable by construction; each sketch's profile is the
    frequency of its own restatements over M.
    """
    oracle = EquivalenceOracle(
        lambda a, b: judge_equivalence(a, b, backend, seed=cfg.seed)
    )
    per_sketch: list[list[str]] = []
    for s in sketches:
        prompt = RESTATE_TEMPLATE.format(sketch=s.text)
        samples = []
        for k in range(cfg.restatement_samples):
            req = BackendRequest(
                backend_id=backend.id,
                kind="complete",
                prompt=prompt,
                params=RequestParams(
                    temperature=1.0, max_tokens=96, seed=cfg.seed + 1000 * s.index + k
                ),
            )
            text = backend.complete(req).text.strip()
            samples.append(text or s.text)
        per_sketch.append(samples)
    classes = GlobalClasses.from_texts([t for block in per_sketch for t in block], oracle)
    candidates = []
    for s, samples in zip(sketches, per_sketch):
        profile = estimate_class_profile(
            samples, oracle, classes, sketch_index=s.index
        )
        vector = backend.embed(
            BackendRequest(backend_id=backend.id, kind="embed", prompt=s.text)
        )
        candidates.append(
            SketchCandidate(sketch=s, profile=profile.distribution, vector=vector)
        )
    return candidates


def generate_policies(
    x: OmniInput,
    z: IntentRepresentation | None,
    cfg: RunConfig,
    pool: BackendPool,
    prompts: PromptBundle | None = None,
    log: LogFn | None = None,
) -> list[PolicySketch]:
    """Produce the final N strategy sketches for an input."""
    prompts = prompts or PromptBundle.default()
    backend = pool.resolve(cfg.roles.policy_generator)
    kept = _request_sketches(x, z, cfg, backend, prompts)
    if cfg.policy_selection == "objective":
        candidates = _profile_candidates(kept, cfg, backend)
        chosen = select_diverse_subset(candidates, cfg.num_policies, cfg.weights)
        final = [
            dataclasses.replace(
                kept[i], index=rank, class_profile=candidates[i].profile
            )
            for rank, i in enumerate(chosen)
        ]
    else:
        final = [
            dataclasses.replace(s, index=rank)
            for rank, s in enumerate(kept[: cfg.num_policies])
        ]
    _log(log, item_id=x.id, ablation=cfg.ablation, stage="generate", backend=backend.id)
    return final


def posterior_and_entropy(
    x: OmniInput,
    s: PolicySketch,
    c: Conditioning,
    cfg: RunConfig,
    pool: BackendPool,
    prompts: PromptBundle | None = None,
) -> tuple[AnswerPosterior, float]:
    """Answer posterior and its entropy for one sketch under conditioning C."""
    prompts = prompts or PromptBundle.default()
    backend = pool.resolve(cfg.roles.selector_id())
    prompt = render_prompt(
        prompts.selector_template,
        query=x.query,
        options=_options_block(x),
        media_note=_media_note(x),
        intent="",
        sketch=_sketch_block(s),
        conditioning=_conditioning_block(c),
    )
    if len(x.options) >= 2:
        req = BackendRequest(
            backend_id=backend.id,
            kind="slot_likelihoods",
            prompt=prompt,
            media=tuple(m for m in (x.video, x.audio) if m),
            params=RequestParams(
                temperature=0.0,
                max_tokens=8,
                seed=cfg.seed,
                slots=x.labels,
                n_samples=cfg.posterior_samples,
            ),
        )
        posterior = backend.answer_slot_likelihoods(req)
    else:
        posterior = _freeform_posterior(x, s, c, cfg, backend, prompts)
    return posterior, infomath.entropy(posterior)


def _freeform_posterior(
    x: OmniInput,
    s: PolicySketch,
    c: Conditioning,
    cfg: RunConfig,
    backend: Backend,
    prompts: PromptBundle,
) -> AnswerPosterior:
    """Posterior over clustered sampled answers for option-free items.

    Draws ``posterior_samples`` answers, clusters them with the equivalence
    judge, and reports cluster frequencies; slots carry each cluster's first
    answer text.
    """
    prompt = render_prompt(
        prompts.reasoner_template,
        query=x.query,
        options="",
        media_note=_media_note(x),
        intent="",
        sketch=_sketch_block(s),
        conditioning=_conditioning_block(c),
    )
    answers = []
    for i in range(cfg.posterior_samples):
        req = BackendRequest(
            backend_id=backend.id,
            kind="complete",
            prompt=prompt,
            media=tuple(m for m in (x.video, x.audio) if m),
            params=RequestParams(temperature=1.0, max_tokens=256, seed=cfg.seed + i),
        )
        text = backend.complete(req).text
        answers.append(parse_answer(text, ()) or text.strip() or "<empty>")
    oracle = EquivalenceOracle(
        lambda a, b: judge_equivalence(a, b, backend, seed=cfg.seed)
    )
    classes = GlobalClasses.from_texts(answers, oracle)
    counts = [0] * classes.count
    for answer in answers:
        assigned = classes.assign(answer, oracle)
        counts[0 if assigned is None else assigned] += 1
    slots = tuple(group[0] for group in classes.members)
    n = len(answers)
    return AnswerPosterior.from_probs(slots, [cnt / n for cnt in counts], PosteriorSource.SAMPLED)


def select_strategy(
    x: OmniInput,
    sketches: Sequence[PolicySketch],
    c: Conditioning,
    cfg: RunConfig,
    pool: BackendPool,
    prompts: PromptBundle | None = None,
    log: LogFn | None = None,
) -> tuple[PolicySketch, list[float]]:
    """Pick the minimum-entropy sketch; a single sketch wins without any calls."""
    if not sketches:
        raise ConfigError("select_strategy needs at least one sketch")
    if len(sketches) == 1:
        _log(
            log,
            item_id=x.id,
            ablation=cfg.ablation,
            stage="select",
            backend=pool.resolve(cfg.roles.selector_id()).id,
            entropies=[],
            selected_index=sketches[0].index,
        )
        return sketches[0], []
    scored: list[tuple[float, float, int]] = []
    entropies: list[float] = []
    for i, sketch in enumerate(sketches):
        posterior, h = posterior_and_entropy(x, sketch, c, cfg, pool, prompts)
        entropies.append(h)
        scored.append((h, -posterior.max_prob, i))
    best = min(scored)
    selected = sketches[best[2]]
    _log(
        log,
        item_id=x.id,
        ablation=cfg.ablation,
        stage="select",
        backend=pool.resolve(cfg.roles.selector_id()).id,
        entropies=entropies,
        selected_index=selected.index,
    )
    return selected, entropies


def solve_with_strategy(
    x: OmniInput,
    s: PolicySketch | None,
    cfg: RunConfig,
    pool: BackendPool,
    prompts: PromptBundle | None = None,
    intent: IntentRepresentation | None = None,
    log: LogFn | None = None,
) -> ReasoningOutcome:
    """Condition the reasoning engine on the chosen sketch and parse the answer.

    The completion must end with the strict "ANSWER: <label>" trailer; one
    repair re-prompt is attempted before giving up.
    """
    prompts = prompts or PromptBundle.default()
    backend = pool.resolve(cfg.roles.reasoning_engine)
    prompt = render_prompt(
        prompts.reasoner_template,
        query=x.query,
        options=_options_block(x),
        media_note=_media_note(x),
        intent=_intent_block(intent),
        sketch=_sketch_block(s),
        conditioning=_conditioning_block(cfg.conditioning),
    )
    media = tuple(m for m in (x.video, x.audio) if m)
    req = BackendRequest(
        backend_id=backend.id,
        kind="complete",
        prompt=prompt,
        media=media,
        params=RequestParams(temperature=0.0, max_tokens=1024, seed=cfg.seed),
    )
    trace = backend.complete(req).text
    answer = parse_answer(trace, x.labels)
    if answer is None:
        repair_req = dataclasses.replace(req, prompt=prompt + REPAIR_SUFFIX)
        try:
            repaired = backend.complete(repair_req).text
        except BackendError as exc:
            raise UnparseableAnswer(
                f"no ANSWER trailer and repair re-prompt failed: {exc}"
            ) from exc
        answer = parse_answer(repaired, x.labels)
        if answer is None:
            raise UnparseableAnswer(f"no ANSWER trailer in completion: {trace[-120:]!r}")
        trace = repaired
    _log(
        log,
        item_id=x.id,
        ablation=cfg.ablation,
        stage="solve",
        backend=backend.id,
        prompt=prompt,
        answer=answer,
    )
    return ReasoningOutcome(
        answer=answer,
        trace=trace,
        selected_sketch_index=s.index if s is not None else NO_SKETCH,
        per_candidate_entropies=(),
    )


def run_pipeline(
    x: OmniInput,
    cfg: RunConfig,
    pool: BackendPool,
    prompts: PromptBundle | None = None,
    log: LogFn | None = None,
) -> ReasoningOutcome:
    """Execute the stages the ablation activates; see the module docstring.

    Any stage failure is re-raised as a StageError naming the stage.
    """
    validate_input(x)
    prompts = prompts or PromptBundle.default()

    def _stage(name: str, fn: Callable[[], Any]) -> Any:
        try:
            return fn()
        except IntentSketchError as exc:
            raise StageError(name, exc) from exc

    intent: IntentRepresentation | None = None
    if cfg.intent_active:
        intent = _stage("intent", lambda: perceive_intent(x, cfg, pool, prompts, log))

    if not cfg.generation_active:
        outcome = _stage(
            "solve", lambda: solve_with_strategy(x, None, cfg, pool, prompts, None, log)
        )
        return dataclasses.replace(
            outcome, selected_sketch_index=NO_SKETCH, per_candidate_entropies=()
        )

    sketches = _stage(
        "generate", lambda: generate_policies(x, intent, cfg, pool, prompts, log)
    )
    selected, entropies = _stage(
        "select",
        lambda: select_strategy(x, sketches, cfg.conditioning, cfg, pool, prompts, log),
    )
    outcome = _stage(
        "solve",
        lambda: solve_with_strategy(x, selected, cfg, pool, prompts, intent, log),
    )
    return dataclasses.replace(
        outcome,
        selected_sketch_index=selected.index,
        per_candidate_entropies=tuple(entropies),
    )
