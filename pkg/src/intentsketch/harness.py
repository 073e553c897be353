"""Dataset ingestion, the evaluation matrix, accuracy scoring, and reports.

The matrix runs every (pipeline LM, reasoning engine, experiment) cell over
every dataset item exactly once; items that error are scored incorrect and
flagged rather than dropped, so denominators stay constant across ablations.
Completed cells found in an existing records file are reused verbatim, which
makes reruns free and their artifacts byte-identical.
"""

from __future__ import annotations

import dataclasses
import json
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from decimal import ROUND_HALF_UP, Decimal
from pathlib import Path
from typing import Any, Iterable, Mapping, NamedTuple, Sequence

from .backends.base import BackendPool
from .core import OmniInput, validate_input
from .errors import (
    ConfigError,
    EmptyRecords,
    IntentSketchError,
    MissingBaseline,
    ParseError,
    ValidationError,
)
from .pipeline import AblationId, LogFn, PromptBundle, RoleBindings, RunConfig, run_pipeline

#: report column order follows the experiment-id table; unknown ids sort after
COLUMN_ORDER = ("CG_Qwen", "CG_GLM", "CG", "Abl_NI", "Abl_SP")
BASELINE_ID = "BaseLine"


@dataclass(frozen=True)
class EvalRecord:
    """One scored pipeline run; ``correct`` iff predicted equals gold."""

    item_id: str
    ablation: str
    pipeline_lm: str
    engine: str
    predicted: str
    gold: str
    correct: bool
    entropies: tuple[float, ...] = ()
    latency_ms: int = 0
    error: str | None = None

    def __post_init__(self) -> None:
        expected = self.predicted != "" and self.predicted == self.gold
        if self.correct != expected:
            raise ValidationError(
                f"record {self.item_id}: correct={self.correct} inconsistent with"
                f" predicted={self.predicted!r} gold={self.gold!r}"
            )
        object.__setattr__(self, "entropies", tuple(float(h) for h in self.entropies))

    def to_dict(self) -> dict[str, Any]:
        return {
            "item_id": self.item_id,
            "ablation": self.ablation,
            "pipeline_lm": self.pipeline_lm,
            "engine": self.engine,
            "predicted": self.predicted,
            "gold": self.gold,
            "correct": self.correct,
            "entropies": list(self.entropies),
            "latency_ms": self.latency_ms,
            "error": self.error,
        }

    @classmethod
    def from_dict(cls, obj: Mapping[str, Any]) -> "EvalRecord":
        return cls(
            item_id=str(obj["item_id"]),
            ablation=str(obj["ablation"]),
            pipeline_lm=str(obj["pipeline_lm"]),
            engine=str(obj["engine"]),
            predicted=str(obj["predicted"]),
            gold=str(obj["gold"]),
            correct=bool(obj["correct"]),
            entropies=tuple(obj.get("entropies", ())),
            latency_ms=int(obj.get("latency_ms", 0)),
            error=obj.get("error"),
        )


@dataclass(frozen=True)
class ExperimentSpec:
    """One matrix column: an ablation plus its intent-perceiver binding."""

    id: str
    ablation: AblationId
    intent_perceiver: str | None = None

    @classmethod
    def parse(cls, entry: str | Mapping[str, Any]) -> "ExperimentSpec":
        if isinstance(entry, str):
            try:
                return cls(id=entry, ablation=AblationId(entry))
            except ValueError as exc:
                raise ConfigError(
                    f"experiment {entry!r} is not a known ablation id;"
                    " use an object with an explicit ablation"
                ) from exc
        try:
            ablation = AblationId(entry["ablation"])
        except (KeyError, ValueError) as exc:
            raise ConfigError(f"experiment entry needs a valid ablation: {entry!r}") from exc
        return cls(
            id=str(entry.get("id", ablation.value)),
            ablation=ablation,
            intent_perceiver=entry.get("intent_perceiver"),
        )


@dataclass(frozen=True)
class MatrixSpec:
    """The experiment matrix: runs are the full Cartesian product."""

    dataset: str
    pipeline_lms: tuple[str, ...]
    engines: tuple[str, ...]
    ablations: tuple[ExperimentSpec, ...]

    def __post_init__(self) -> None:
        if not (self.dataset and self.pipeline_lms and self.engines and self.ablations):
            raise ConfigError("matrix spec needs dataset, pipeline_lms, engines, ablations")
        ids = [e.id for e in self.ablations]
        if len(set(ids)) != len(ids):
            raise ConfigError(f"duplicate experiment ids: {ids}")

    @classmethod
    def from_dict(cls, obj: Mapping[str, Any]) -> "MatrixSpec":
        entries = obj.get("ablations", obj.get("experiments", ()))
        return cls(
            dataset=str(obj.get("dataset", "")),
            pipeline_lms=tuple(obj.get("pipeline_lms", ())),
            engines=tuple(obj.get("engines", ())),
            ablations=tuple(ExperimentSpec.parse(e) for e in entries),
        )

    @classmethod
    def load(cls, path: str | Path) -> "MatrixSpec":
        try:
            obj = json.loads(Path(path).read_text(encoding="utf-8"))
        except (OSError, ValueError) as exc:
            raise ConfigError(f"cannot load matrix spec {path}: {exc}") from exc
        return cls.from_dict(obj)


class CellKey(NamedTuple):
    engine: str
    pipeline_lm: str
    experiment: str


# -- dataset ------------------------------------------------------------------

def load_dataset(path: str | Path) -> list[OmniInput]:
    """Parse and validate a JSONL dataset; failures carry their line number."""
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read dataset {path}: {exc}") from exc
    items = []
    for lineno, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            continue
        try:
            obj = json.loads(line)
        except ValueError as exc:
            raise ParseError(f"invalid JSON: {exc}", line=lineno) from exc
        try:
            items.append(validate_input(OmniInput.from_dict(obj)))
        except ValidationError as exc:
            raise type(exc)(str(exc), line=lineno) from exc
    return items


# -- scoring --------------------------------------------------------------------

def accuracy(records: Sequence[EvalRecord]) -> float:
    """Percentage correct, rounded half-up to two decimals."""
    if not records:
        raise EmptyRecords("accuracy over zero records")
    correct = sum(1 for r in records if r.correct)
    pct = Decimal(correct * 100) / Decimal(len(records))
    return float(pct.quantize(Decimal("0.01"), rounding=ROUND_HALF_UP))


# -- matrix execution --------------------------------------------------------------

def _cell_config(base: RunConfig, exp: ExperimentSpec, lm: str, engine: str) -> RunConfig:
    """Wire one cell: generator = pipeline LM, evaluator/engine = engine,
    perceiver = the experiment's binding (falling back to the pipeline LM)."""
    roles = RoleBindings(
        intent_perceiver=exp.intent_perceiver or lm,
        policy_generator=lm,
        strategy_selector=base.roles.strategy_selector,
        reasoning_engine=engine,
    )
    return dataclasses.replace(base, ablation=exp.ablation, roles=roles)


def _run_item(
    x: OmniInput,
    cfg: RunConfig,
    pool: BackendPool,
    prompts: PromptBundle | None,
    key: CellKey,
    log: LogFn | None,
) -> EvalRecord:
    start = time.perf_counter()
    predicted = ""
    entropies: tuple[float, ...] = ()
    error = None
    try:
        outcome = run_pipeline(x, cfg, pool, prompts, log)
        predicted = outcome.answer
        entropies = outcome.per_candidate_entropies
    except IntentSketchError as exc:
        error = f"{type(exc).__name__}: {exc}"
    latency_ms = int((time.perf_counter() - start) * 1000)
    gold = x.gold or ""
    return EvalRecord(
        item_id=x.id,
        ablation=key.experiment,
        pipeline_lm=key.pipeline_lm,
        engine=key.engine,
        predicted=predicted,
        gold=gold,
        correct=predicted != "" and predicted == gold,
        entropies=entropies,
        latency_ms=latency_ms,
        error=error,
    )


def _records_path(out_dir: str | Path) -> Path:
    return Path(out_dir) / "records.jsonl"


def load_records(path: str | Path) -> list[EvalRecord]:
    path = Path(path)
    if not path.exists():
        return []
    records = []
    for lineno, line in enumerate(path.read_text(encoding="utf-8").splitlines(), start=1):
        if not line.strip():
            continue
        try:
            records.append(EvalRecord.from_dict(json.loads(line)))
        except (ValueError, KeyError) as exc:
            raise ParseError(f"bad record: {exc}", line=lineno) from exc
    return records


def write_records(records: Iterable[EvalRecord], path: str | Path) -> None:
    """Write records sorted on a canonical key, one canonical JSON per line."""
    ordered = sorted(
        records, key=lambda r: (r.engine, r.pipeline_lm, r.ablation, r.item_id)
    )
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    lines = [
        json.dumps(r.to_dict(), sort_keys=True, separators=(",", ":"), ensure_ascii=False)
        for r in ordered
    ]
    path.write_text("\n".join(lines) + ("\n" if lines else ""), encoding="utf-8")


def run_matrix(
    spec: MatrixSpec,
    base_cfg: RunConfig,
    pool: BackendPool,
    prompts: PromptBundle | None = None,
    *,
    out_dir: str | Path | None = None,
    concurrency: int = 1,
    log: LogFn | None = None,
) -> dict[CellKey, list[EvalRecord]]:
    """Evaluate every cell of the matrix over every dataset item.

    When ``out_dir`` holds records from an earlier run, cells already complete
    are reused without touching any backend; fresh results are merged in and
    the records file is rewritten in canonical order.
    """
    items = load_dataset(spec.dataset)
    existing: dict[tuple[CellKey, str], EvalRecord] = {}
    if out_dir is not None:
        for record in load_records(_records_path(out_dir)):
            key = CellKey(record.engine, record.pipeline_lm, record.ablation)
            existing[(key, record.item_id)] = record

    cells: dict[CellKey, list[EvalRecord]] = {}
    for engine in spec.engines:
        for lm in spec.pipeline_lms:
            for exp in spec.ablations:
                key = CellKey(engine, lm, exp.id)
                cached = [existing.get((key, x.id)) for x in items]
                if all(r is not None for r in cached):
                    cells[key] = list(cached)  # type: ignore[arg-type]
                    continue
                cfg = _cell_config(base_cfg, exp, lm, engine)
                todo = [x for x, r in zip(items, cached) if r is None]
                fresh: dict[str, EvalRecord] = {}
                if concurrency > 1 and len(todo) > 1:
                    with ThreadPoolExecutor(max_workers=concurrency) as pool_exec:
                        futures = {
                            x.id: pool_exec.submit(_run_item, x, cfg, pool, prompts, key, log)
                            for x in todo
                        }
                        fresh = {item_id: f.result() for item_id, f in futures.items()}
                else:
                    fresh = {x.id: _run_item(x, cfg, pool, prompts, key, log) for x in todo}
                cells[key] = [
                    existing.get((key, x.id)) or fresh[x.id] for x in items
                ]
    if out_dir is not None:
        write_records((r for recs in cells.values() for r in recs), _records_path(out_dir))
    return cells


def cell_accuracies(cells: Mapping[CellKey, Sequence[EvalRecord]]) -> dict[CellKey, float]:
    return {key: accuracy(records) for key, records in cells.items()}


def baselines_from_cells(cells: Mapping[CellKey, float]) -> dict[str, float]:
    """Per-engine baseline accuracy taken from the no-pipeline experiment."""
    baselines: dict[str, float] = {}
    for key in sorted(cells):
        if key.experiment == BASELINE_ID and key.engine not in baselines:
            baselines[key.engine] = cells[key]
    return baselines


# -- report rendering ------------------------------------------------------------------

def _column_rank(experiment: str) -> tuple[int, str]:
    try:
        return (COLUMN_ORDER.index(experiment), "")
    except ValueError:
        return (len(COLUMN_ORDER), experiment)


def _fmt(acc: float) -> str:
    return f"{acc:.2f}"


def _fmt_delta(acc: float, base: float) -> str:
    return f"({acc - base:+.2f} pp)"


def render_report(
    cells: Mapping[CellKey, float] | Mapping[tuple[str, str, str], float],
    baselines: Mapping[str, float],
    *,
    title: str = "Accuracy report",
) -> tuple[str, str]:
    """Render per-engine accuracy tables as (markdown, csv).

    Rows are pipeline LMs, columns the experiment ids in fixed table order,
    each cell "acc (+delta pp)" against the engine's baseline.  A per-engine
    summary line names the best cell with its absolute and relative gain.
    Output is byte-stable for identical inputs.
    """
    if not cells:
        raise EmptyRecords("no cells to render")
    typed = {CellKey(*key): value for key, value in cells.items()}
    engines = sorted({k.engine for k in typed})
    for engine in engines:
        if engine not in baselines:
            raise MissingBaseline(f"no baseline accuracy for engine {engine!r}")

    md: list[str] = [f"# {title}", ""]
    csv_lines = ["engine,baseline,pipeline_lm,experiment,accuracy,delta_pp"]
    for engine in engines:
        base = baselines[engine]
        keys = [k for k in typed if k.engine == engine and k.experiment != BASELINE_ID]
        columns = sorted({k.experiment for k in keys}, key=_column_rank)
        lms = sorted({k.pipeline_lm for k in keys})
        md.append(f"## {engine} (baseline {_fmt(base)})")
        md.append("")
        md.append("| Pipeline | " + " | ".join(columns) + " |")
        md.append("| --- |" + " --- |" * len(columns))
        best: tuple[float, int, str, str] | None = None
        for lm in lms:
            row = [lm]
            for col_rank, column in enumerate(columns):
                key = CellKey(engine, lm, column)
                if key in typed:
                    acc = typed[key]
                    row.append(f"{_fmt(acc)} {_fmt_delta(acc, base)}")
                    csv_lines.append(
                        f"{engine},{_fmt(base)},{lm},{column},{_fmt(acc)},{acc - base:+.2f}"
                    )
                    candidate = (-acc, col_rank, lm, column)
                    if best is None or candidate < (-best[0], *best[1:]):
                        best = (acc, col_rank, lm, column)
                else:
                    row.append("-")
            md.append("| " + " | ".join(row) + " |")
        md.append("")
        if best is not None:
            acc, _, lm, column = best
            relative = 100.0 * (acc - base) / base
            md.append(
                f"Best: {_fmt(acc)} ({column}, pipeline {lm}, "
                f"{acc - base:+.2f} pp, {relative:.2f}% relative)"
            )
            md.append("")
    return "\n".join(md).rstrip("\n") + "\n", "\n".join(csv_lines) + "\n"


def parse_report_csv(text: str) -> tuple[dict[CellKey, float], dict[str, float]]:
    """Inverse of the CSV side of render_report, for round-trip checks."""
    lines = [line for line in text.splitlines() if line.strip()]
    if not lines or lines[0] != "engine,baseline,pipeline_lm,experiment,accuracy,delta_pp":
        raise ParseError("unrecognized report csv header")
    cells: dict[CellKey, float] = {}
    baselines: dict[str, float] = {}
    for lineno, line in enumerate(lines[1:], start=2):
        parts = line.split(",")
        if len(parts) != 6:
            raise ParseError(f"expected 6 fields, got {len(parts)}", line=lineno)
        engine, base, lm, experiment, acc, _delta = parts
        cells[CellKey(engine, lm, experiment)] = float(acc)
        baselines[engine] = float(base)
    return cells, baselines
