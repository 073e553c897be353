"""Intent-sketch reasoning: a plug-and-play pipeline for omni-modal QA.

The pipeline perceives the question's intent, generates diverse candidate
strategy sketches, selects the sketch whose answer posterior has minimum
entropy, and conditions a reasoning engine on it.  The package also ships a
synthetic-world lab verifying the entropy-reduction properties the design
relies on, plus an evaluation harness for pipeline x engine x ablation
matrices.
"""

from .core import (
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
    validate_input,
)
from .pipeline import (
    AblationId,
    PromptBundle,
    RoleBindings,
    RunConfig,
    run_pipeline,
)

__version__ = "0.1.0"

__all__ = [
    "AblationId",
    "AnswerPosterior",
    "ClassDistribution",
    "Conditioning",
    "IntentRepresentation",
    "ObjectiveWeights",
    "OmniInput",
    "Option",
    "PolicySketch",
    "PosteriorSource",
    "PromptBundle",
    "ReasoningOutcome",
    "RoleBindings",
    "RunConfig",
    "__version__",
    "run_pipeline",
    "validate_input",
]
