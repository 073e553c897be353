"""Command-line entry point: run, eval, simlab, and report subcommands.

Machine-readable results go to stdout; human logs go to stderr.  Exit codes:
0 success, 2 configuration error, 3 backend error, 4 parse error (simlab adds
exit 1 for a failed check).
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path
from typing import Any, Sequence

import numpy as np

from .backends import (
    BackendPool,
    CachingBackend,
    HttpBackend,
    ResponseCache,
    load_backend_configs,
    load_scenario,
)
from .core import OmniInput, validate_input
from .errors import (
    BackendError,
    ConfigError,
    IntentSketchError,
    ParseError,
    StageError,
    UnparseableAnswer,
    UnparseableVerdict,
    ValidationError,
)
from .harness import (
    MatrixSpec,
    accuracy,
    baselines_from_cells,
    cell_accuracies,
    load_records,
    render_report,
    run_matrix,
)
from .pipeline import JsonlLogger, PromptBundle, RunConfig, run_pipeline
from . import simlab

EXIT_OK = 0
EXIT_CHECK_FAILED = 1
EXIT_CONFIG = 2
EXIT_BACKEND = 3
EXIT_PARSE = 4

SIMLAB_CHECKS = ("contraction", "dpi", "min_vs_mean", "strict_reduction", "intent_gain", "all")


def _log(message: str) -> None:
    print(message, file=sys.stderr)


def _exit_code_for(exc: IntentSketchError) -> int:
    seen: Exception | None = exc
    while seen is not None:
        if isinstance(seen, (ParseError, UnparseableAnswer, UnparseableVerdict)):
            return EXIT_PARSE
        if isinstance(seen, (ConfigError, ValidationError)):
            return EXIT_CONFIG
        if isinstance(seen, BackendError):
            return EXIT_BACKEND
        seen = seen.cause if isinstance(seen, StageError) else None
    return EXIT_BACKEND


def _build_pool(args: argparse.Namespace) -> BackendPool:
    """Backends from a mock scenario or an endpoint config file, cache-wrapped."""
    cache = ResponseCache(args.cache) if getattr(args, "cache", None) else None

    def wrap(backend: Any) -> Any:
        return CachingBackend(backend, cache) if cache is not None else backend

    if getattr(args, "mock_scenario", None):
        mocks = load_scenario(args.mock_scenario)
        pool = BackendPool(default=wrap(next(iter(mocks.values()))))
        for mock in mocks.values():
            pool.register(wrap(mock))
        return pool
    if getattr(args, "backends", None):
        configs = load_backend_configs(args.backends)
        pool = BackendPool()
        for cfg in configs.values():
            pool.register(wrap(HttpBackend(cfg)))
        return pool
    raise ConfigError("need --mock-scenario or --backends")


def _load_run_config(args: argparse.Namespace) -> RunConfig:
    obj: dict[str, Any] = {}
    if getattr(args, "config", None):
        try:
            obj = json.loads(Path(args.config).read_text(encoding="utf-8"))
        except (OSError, ValueError) as exc:
            raise ConfigError(f"cannot load run config {args.config}: {exc}") from exc
    if getattr(args, "ablation", None):
        obj["ablation"] = args.ablation
    if getattr(args, "seed", None) is not None:
        obj["seed"] = args.seed
    return RunConfig.from_dict(obj)


def _load_prompts(args: argparse.Namespace) -> PromptBundle:
    if getattr(args, "prompts", None):
        return PromptBundle.from_dir(args.prompts)
    return PromptBundle.default()


# -- subcommands -----------------------------------------------------------------

def cmd_run(args: argparse.Namespace) -> int:
    if args.item:
        try:
            obj = json.loads(Path(args.item).read_text(encoding="utf-8"))
        except OSError as exc:
            raise ConfigError(f"cannot read item {args.item}: {exc}") from exc
        except ValueError as exc:
            raise ParseError(f"item file is not JSON: {exc}") from exc
        item = validate_input(OmniInput.from_dict(obj))
    elif args.query:
        options = [{"label": lab, "text": text} for lab, _, text in
                   (opt.partition("=") for opt in args.option or [])]
        item = validate_input(
            OmniInput.from_dict({"id": "inline", "query": args.query, "options": options})
        )
    else:
        raise ConfigError("need --item or --query")
    cfg = _load_run_config(args)
    pool = _build_pool(args)
    log = JsonlLogger(args.log) if args.log else None
    outcome = run_pipeline(item, cfg, pool, _load_prompts(args), log)
    print(json.dumps(outcome.to_dict(), sort_keys=True, ensure_ascii=False))
    _log(f"run ok: item={item.id} ablation={cfg.ablation.value}")
    return EXIT_OK


def cmd_eval(args: argparse.Namespace) -> int:
    spec = MatrixSpec.load(args.spec)
    cfg = _load_run_config(args)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    if not getattr(args, "cache", None):
        args.cache = str(out_dir / "cache")
    pool = _build_pool(args)
    log = JsonlLogger(out_dir / "run_log.jsonl") if args.stage_log else None
    cells = run_matrix(
        spec,
        cfg,
        pool,
        _load_prompts(args),
        out_dir=out_dir,
        concurrency=args.concurrency,
        log=log,
    )
    accuracies = cell_accuracies(cells)
    baselines = baselines_from_cells(accuracies)
    if args.baselines:
        try:
            baselines.update(json.loads(Path(args.baselines).read_text(encoding="utf-8")))
        except (OSError, ValueError) as exc:
            raise ConfigError(f"cannot load baselines {args.baselines}: {exc}") from exc
    md, csv_text = render_report(accuracies, baselines)
    (out_dir / "report.md").write_text(md, encoding="utf-8")
    (out_dir / "report.csv").write_text(csv_text, encoding="utf-8")
    print(md, end="")
    _log(f"eval ok: {len(cells)} cells -> {out_dir}")
    return EXIT_OK


def cmd_simlab(args: argparse.Namespace) -> int:
    checks = SIMLAB_CHECKS[:-1] if args.check == "all" else (args.check,)
    n_samples = 0 if args.exact else args.n
    all_passed = True
    for seed in range(args.seeds):
        world = simlab.SyntheticWorld.random(seed)
        for check in checks:
            if check == "contraction":
                result = simlab.contraction_check(world, n_samples).to_dict()
            elif check == "dpi":
                result = simlab.dpi_check(world).to_dict()
            elif check == "strict_reduction":
                result = simlab.strict_reduction_demo(world).to_dict()
            elif check == "intent_gain":
                result = simlab.intent_gain_check(seed).to_dict()
            else:  # min_vs_mean over seeded random posterior sets
                rng = np.random.default_rng(seed)
                posteriors = [
                    rng.dirichlet(np.ones(rng.integers(2, 7)))
                    for _ in range(rng.integers(1, 9))
                ]
                result = simlab.min_vs_mean_check(posteriors).to_dict()
            result["seed"] = seed
            if check == "contraction":
                result["quantities"]["fano"] = simlab.fano_diagnostic(world)
            print(json.dumps(result, sort_keys=True))
            all_passed &= bool(result["pass"])
    if not all_passed:
        _log("simlab: at least one check failed")
        return EXIT_CHECK_FAILED
    _log(f"simlab ok: {len(checks)} check(s) x {args.seeds} seed(s)")
    return EXIT_OK


def cmd_report(args: argparse.Namespace) -> int:
    if args.records:
        records = load_records(args.records)
        by_cell: dict[Any, list[Any]] = {}
        for record in records:
            by_cell.setdefault(
                (record.engine, record.pipeline_lm, record.ablation), []
            ).append(record)
        cells = {key: accuracy(recs) for key, recs in by_cell.items()}
    elif args.cells:
        try:
            raw = json.loads(Path(args.cells).read_text(encoding="utf-8"))
        except (OSError, ValueError) as exc:
            raise ConfigError(f"cannot load cells {args.cells}: {exc}") from exc
        cells = {
            (c["engine"], c["pipeline_lm"], c["experiment"]): float(c["accuracy"])
            for c in raw["cells"]
        }
    else:
        raise ConfigError("need --records or --cells")
    baselines = baselines_from_cells(cells)
    if args.baselines:
        try:
            baselines.update(json.loads(Path(args.baselines).read_text(encoding="utf-8")))
        except (OSError, ValueError) as exc:
            raise ConfigError(f"cannot load baselines {args.baselines}: {exc}") from exc
    md, csv_text = render_report(cells, baselines)
    if args.out:
        out_dir = Path(args.out)
        out_dir.mkdir(parents=True, exist_ok=True)
        (out_dir / "report.md").write_text(md, encoding="utf-8")
        (out_dir / "report.csv").write_text(csv_text, encoding="utf-8")
    print(md, end="")
    return EXIT_OK


# -- parser -------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="intentsketch",
        description="Intent-sketch reasoning pipeline: run items, evaluate "
        "matrices, verify entropy properties, render reports.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add_backend_flags(p: argparse.ArgumentParser) -> None:
        p.add_argument("--backends", help="backend endpoint config JSON")
        p.add_argument("--mock-scenario", help="scripted mock scenario JSON")
        p.add_argument("--cache", help="response cache directory")
        p.add_argument("--prompts", help="prompt template directory")
        p.add_argument("--config", help="run config JSON")
        p.add_argument("--seed", type=int, default=None)

    run_p = sub.add_parser("run", help="run the pipeline on one item")
    add_backend_flags(run_p)
    run_p.add_argument("--item", help="JSON file with one dataset item")
    run_p.add_argument("--query", help="inline question text")
    run_p.add_argument("--option", action="append", help="inline option LABEL=TEXT")
    run_p.add_argument("--ablation", help="CG | Abl_NI | Abl_SP | BaseLine")
    run_p.add_argument("--log", help="stage log JSONL path")
    run_p.set_defaults(fn=cmd_run)

    eval_p = sub.add_parser("eval", help="run the experiment matrix")
    add_backend_flags(eval_p)
    eval_p.add_argument("--spec", required=True, help="matrix spec JSON")
    eval_p.add_argument("--out", required=True, help="output directory")
    eval_p.add_argument("--baselines", help="JSON {engine: accuracy} overrides")
    eval_p.add_argument("--concurrency", type=int, default=4)
    eval_p.add_argument("--stage-log", action="store_true", help="write run_log.jsonl")
    eval_p.set_defaults(fn=cmd_eval)

    sim_p = sub.add_parser("simlab", help="verify entropy properties on synthetic worlds")
    sim_p.add_argument("check", choices=SIMLAB_CHECKS)
    sim_p.add_argument("--seeds", type=int, default=10, help="number of seeded worlds")
    sim_p.add_argument("--n", type=int, default=10_000, help="Monte Carlo sample count")
    sim_p.add_argument("--exact", action="store_true", help="exact enumeration only")
    sim_p.set_defaults(fn=cmd_simlab)

    report_p = sub.add_parser("report", help="render a report from records or cells")
    report_p.add_argument("--records", help="records.jsonl from eval")
    report_p.add_argument("--cells", help="JSON {cells: [{engine, pipeline_lm, experiment, accuracy}]}")
    report_p.add_argument("--baselines", help="JSON {engine: accuracy}")
    report_p.add_argument("--out", help="output directory")
    report_p.set_defaults(fn=cmd_report)

    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return int(args.fn(args))
    except IntentSketchError as exc:
        _log(f"error: {type(exc).__name__}: {exc}")
        return _exit_code_for(exc)


if __name__ == "__main__":
    sys.exit(main())
