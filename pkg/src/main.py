"""
Command-line entry point.

    python -m src.main generate --seed 42 --per-class 100 --out corpus.jsonl
    python -m src.main detect --in corpus.jsonl --method hybrid --out predictions.jsonl
    python -m src.main sweep --in corpus.jsonl --truth corpus.manifest.json \\
        --method cdcs --param k --from 0.2 --to 1.5 --step 0.1 --out sweep.csv
    python -m src.main eval --pred predictions.jsonl --truth corpus.manifest.json
    python -m src.main benchmark --out-dir bench/

Exit codes: 0 success, 1 runtime or I/O failure, 2 configuration error.
"""
import argparse
import json
import logging
import sys
import time
from datetime import datetime, timezone
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional, Sequence

from pydantic import ValidationError

from src.config import Settings, load_settings
from src.generator.corpus import generate_corpus
from src.models.corpus import GeneratorSpec
from src.models.detection import DetectionMethod
from src.models.errors import CycleDetectionError, ParameterError
from src.models.evaluation import SweepGrid
from src.models.models import GroundTruthClass, Trajectory
from src.providers import create_provider
from src.providers.base import EmbeddingProvider
from src.services.detection_service import DetectionService, DetectorConfig, summarize
from src.services.evaluation import (
    ReportRow,
    best_row,
    binary_truth,
    class_breakdown,
    format_report,
    predictions_of,
    read_predictions,
    report_json,
    score,
    sweep,
    threshold_text,
    write_predictions,
    write_sweep_csv,
)
from src.services.graph_views import build_dag, to_dot
from src.services.trace_loader import (
    assemble_trajectories_lenient,
    load_labels,
    load_variants,
    read_spans,
)

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_RUNTIME = 1
EXIT_CONFIG = 2

LOG_FORMAT = '%(asctime)s - %(name)s - %(levelname)s - %(message)s'

# CLI flag (argparse dest) -> Settings field
FLAG_SETTINGS = {
    "log_level": "LOG_LEVEL",
    "method": "DETECTION_METHOD",
    "m": "CDDAG_M",
    "max_len": "MAX_SUBSEQUENCE_LEN",
    "scope": "HYBRID_SCOPE",
    "provider": "EMBEDDING_PROVIDER",
    "endpoint": "EMBEDDING_ENDPOINT",
    "dim": "EMBEDDING_DIMENSION",
    "timeout": "EMBEDDING_TIMEOUT_SECONDS",
    "workers": "WORKERS",
    "seed": "GENERATOR_SEED",
    "per_class": "GENERATOR_PER_CLASS",
    "counts": "GENERATOR_COUNTS",
    "noise": "GENERATOR_NOISE",
    "depth": "GENERATOR_DEPTH",
    "repeat_min": "GENERATOR_REPEAT_MIN",
    "repeat_max": "GENERATOR_REPEAT_MAX",
    "hard_timeseries_ratio": "GENERATOR_HARD_TIMESERIES_RATIO",
}

# Grids of the benchmark sweeps: (method, param, start, stop, step)
BENCHMARK_GRIDS = (
    (DetectionMethod.CDDAG, "m", 1.2, 1.8, 0.1),
    (DetectionMethod.CDCS, "k", 0.2, 1.5, 0.1),
    (DetectionMethod.CDSA, "phi", 0.75, 0.95, 0.05),
)


# ============================================================================
# Argument parsing
# ============================================================================

def _common_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, help="KEY=value config file or a previous run manifest")
    common.add_argument("--log-level", dest="log_level", help="DEBUG, INFO, WARNING, ERROR")
    return common


def _detector_parser() -> argparse.ArgumentParser:
    detector = argparse.ArgumentParser(add_help=False)
    detector.add_argument("--m", type=float, help="CDDAG multiplier")
    detector.add_argument("--k", type=float, help="CDCS / hybrid gate multiplier")
    detector.add_argument("--phi", type=float, help="CDSA / hybrid cosine threshold")
    detector.add_argument("--max-len", dest="max_len", type=int, help="Longest CDCS window")
    detector.add_argument("--scope", help="Hybrid confirmation scope (full, flagged_only)")
    detector.add_argument("--provider", help="Embedding provider (builtin, remote)")
    detector.add_argument("--endpoint", help="Remote embedding endpoint URL")
    detector.add_argument("--dim", type=int, help="Builtin embedding dimension")
    detector.add_argument("--timeout", type=float, help="Remote request timeout in seconds")
    detector.add_argument("--workers", type=int, help="Concurrent worker threads")
    return detector


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="python -m src.main",
        description="Detect bad cycles in agent execution trajectories.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    common, detector = _common_parser(), _detector_parser()

    generate = sub.add_parser("generate", parents=[common], help="Write a labeled synthetic corpus")
    generate.add_argument("--seed", type=int)
    generate.add_argument("--per-class", dest="per_class", type=int)
    generate.add_argument("--counts", help="Per-class counts, e.g. productive=10,silent_cycle=5")
    generate.add_argument("--noise", type=float)
    generate.add_argument("--depth", type=int)
    generate.add_argument("--repeat-min", dest="repeat_min", type=int)
    generate.add_argument("--repeat-max", dest="repeat_max", type=int)
    generate.add_argument("--hard-timeseries-ratio", dest="hard_timeseries_ratio", type=float)
    generate.add_argument("--out", type=Path, required=True)
    generate.add_argument("--manifest", type=Path)

    detect = sub.add_parser("detect", parents=[common, detector], help="Label every trajectory")
    detect.add_argument("--in", dest="input", type=Path, required=True)
    detect.add_argument("--method")
    detect.add_argument("--out", type=Path, required=True)
    detect.add_argument("--rejects", type=Path, help="Where rejected trajectories are reported")
    detect.add_argument("--dot", type=Path, help="Write the op graph of one trajectory as DOT")
    detect.add_argument("--dot-trace", dest="dot_trace", help="Trace id for --dot (default: first)")

    sweep_cmd = sub.add_parser("sweep", parents=[common, detector], help="Score a parameter grid")
    sweep_cmd.add_argument("--in", dest="input", type=Path, required=True)
    sweep_cmd.add_argument("--truth", type=Path, required=True)
    sweep_cmd.add_argument("--method", required=True)
    sweep_cmd.add_argument("--param", required=True)
    sweep_cmd.add_argument("--from", dest="start", type=float)
    sweep_cmd.add_argument("--to", dest="stop", type=float)
    sweep_cmd.add_argument("--step", type=float)
    sweep_cmd.add_argument("--values", help="Comma-separated grid instead of --from/--to/--step")
    sweep_cmd.add_argument("--out", type=Path, required=True)

    evaluate = sub.add_parser("eval", parents=[common], help="Score a predictions file")
    evaluate.add_argument("--pred", type=Path, required=True)
    evaluate.add_argument("--truth", type=Path, required=True)
    evaluate.add_argument("--json", dest="json_out", type=Path, help="Also write the report as JSON")
    evaluate.add_argument("--reference", action="store_true", help="Print the published reference results beside the measured ones")

    benchmark = sub.add_parser("benchmark", parents=[common], help="Generate, detect, sweep and evaluate")
    benchmark.add_argument("--out-dir", dest="out_dir", type=Path, required=True)
    benchmark.add_argument("--seed", type=int)
    benchmark.add_argument("--per-class", dest="per_class", type=int)

    return parser


# ============================================================================
# Configuration
# ============================================================================

def resolve_settings(args: argparse.Namespace) -> Settings:
    """
    Settings for this invocation.

    ``--k``/``--phi`` land on the hybrid or the standalone fields depending
    on the method in effect, so the method is resolved first.
    """
    overrides = {
        field: getattr(args, flag)
        for flag, field in FLAG_SETTINGS.items()
        if getattr(args, flag, None) is not None
    }
    config = load_settings(args.config, overrides)

    hybrid = config.DETECTION_METHOD == DetectionMethod.HYBRID.value
    if getattr(args, "k", None) is not None:
        overrides["HYBRID_K" if hybrid else "CDCS_K"] = args.k
    if getattr(args, "phi", None) is not None:
        overrides["HYBRID_PHI" if hybrid else "CDSA_PHI"] = args.phi
    return load_settings(args.config, overrides)


def parse_counts(text: str) -> Dict[GroundTruthClass, int]:
    counts = {cls: 0 for cls in GroundTruthClass}
    for part in filter(None, (piece.strip() for piece in text.split(","))):
        name, _, value = part.partition("=")
        try:
            counts[GroundTruthClass(name.strip())] = int(value)
        except ValueError:
            raise ParameterError(f"Invalid class count '{part}'")
    return counts


def generator_spec(config: Settings) -> GeneratorSpec:
    counts = config.GENERATOR_COUNTS
    return GeneratorSpec(
        seed=config.GENERATOR_SEED,
        counts=parse_counts(counts) if counts else {cls: config.GENERATOR_PER_CLASS for cls in GroundTruthClass},
        noise=config.GENERATOR_NOISE,
        depth=config.GENERATOR_DEPTH,
        repeat_range=(config.GENERATOR_REPEAT_MIN, config.GENERATOR_REPEAT_MAX),
        hard_timeseries_ratio=config.GENERATOR_HARD_TIMESERIES_RATIO,
    )


def write_run_manifest(
    out: Path,
    command: str,
    paths: Dict[str, Optional[Path]],
    config: Settings,
    counts: Dict[str, Any]
) -> Path:
    """Write ``<out>.manifest.json``; its ``config`` object replays the run via --config."""
    manifest_path = out.with_name(out.name + ".manifest.json")
    manifest = {
        "command": command,
        "paths": {name: str(path) if path else None for name, path in paths.items()},
        "config": config.effective_config(),
        "counts": counts,
        "generated_at": datetime.now(timezone.utc).isoformat(),
    }
    with open(manifest_path, "w", encoding="utf-8", newline="\n") as handle:
        json.dump(manifest, handle, indent=2)
        handle.write("\n")
    return manifest_path


def _write_jsonl(records: Sequence[dict], path: Path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as handle:
        for record in records:
            handle.write(json.dumps(record, separators=(",", ":")))
            handle.write("\n")


def _load_corpus(path: Path, rejects_path: Optional[Path] = None) -> List[Trajectory]:
    trajectories, rejects = assemble_trajectories_lenient(read_spans(path))
    if rejects:
        logger.warning(f"{len(rejects)} trajectories rejected from {path}")
    if rejects_path is not None:
        _write_jsonl(rejects, rejects_path)
    logger.info(f"Loaded {len(trajectories)} trajectories from {path}")
    return trajectories


def _provider_for(config: DetectorConfig, settings: Settings) -> Optional[EmbeddingProvider]:
    return create_provider(settings) if config.needs_provider else None


# ============================================================================
# Commands
# ============================================================================

def cmd_generate(args: argparse.Namespace, config: Settings) -> int:
    spec = generator_spec(config)
    manifest = generate_corpus(spec, args.out, args.manifest, config.effective_config())
    for cls, count in manifest.counts.items():
        logger.info(f"  {cls.value}: {count}")
    return EXIT_OK


def cmd_detect(args: argparse.Namespace, config: Settings) -> int:
    rejects_path = args.rejects or args.out.with_name(args.out.name + ".rejects.jsonl")
    trajectories = _load_corpus(args.input, rejects_path)

    detector = DetectorConfig.from_settings(config)
    provider = _provider_for(detector, config)
    try:
        detections = DetectionService(detector, provider, config.WORKERS).run(trajectories)
    finally:
        if provider is not None:
            provider.close()
    write_predictions(detections, args.out)

    if args.dot:
        _write_dot(trajectories, args.dot, args.dot_trace)

    totals = summarize(detections)
    write_run_manifest(
        args.out,
        "detect",
        {"input": args.input, "output": args.out, "rejects": rejects_path, "dot": args.dot},
        config,
        {**totals, "rejected": _count_lines(rejects_path)},
    )
    return EXIT_OK


def _write_dot(trajectories: Sequence[Trajectory], path: Path, trace_id: Optional[str]) -> None:
    if not trajectories:
        raise ParameterError("No trajectory available for --dot")
    if trace_id is None:
        chosen = trajectories[0]
    else:
        matches = [t for t in trajectories if t.trace_id == trace_id]
        if not matches:
            raise ParameterError(f"Trace {trace_id} not found for --dot")
        chosen = matches[0]
    with open(path, "w", encoding="utf-8", newline="\n") as handle:
        handle.write(to_dot(build_dag(chosen)))
    logger.info(f"Wrote op graph of {chosen.trace_id} to {path}")


def _count_lines(path: Path) -> int:
    if not path.exists():
        return 0
    with open(path, "r", encoding="utf-8") as handle:
        return sum(1 for line in handle if line.strip())


def _grid_from_args(args: argparse.Namespace, method: DetectionMethod) -> SweepGrid:
    if args.values:
        try:
            values = [float(value) for value in args.values.split(",") if value.strip()]
        except ValueError:
            raise ParameterError(f"Invalid --values '{args.values}'")
        return SweepGrid(method=method, param=args.param, values=values)
    if args.start is None or args.stop is None or args.step is None:
        raise ParameterError("sweep needs --values or all of --from, --to and --step")
    if args.step <= 0:
        raise ParameterError(f"--step must be positive, got {args.step}")
    return SweepGrid.from_range(method, args.param, args.start, args.stop, args.step)


def _truth_for(trajectories: Sequence[Trajectory], truth_path: Path) -> Dict[str, int]:
    truth = binary_truth(load_labels(truth_path))
    kept = {t.trace_id for t in trajectories}
    dropped = len(set(truth) - kept)
    if dropped:
        logger.warning(f"{dropped} labeled trajectories were rejected and are left out of scoring")
    return {trace_id: label for trace_id, label in truth.items() if trace_id in kept}


def cmd_sweep(args: argparse.Namespace, config: Settings) -> int:
    method = DetectionMethod(config.DETECTION_METHOD)
    grid = _grid_from_args(args, method)
    trajectories = _load_corpus(args.input)
    truth = _truth_for(trajectories, args.truth)

    base = DetectorConfig.from_settings(config)
    provider = _provider_for(base, config)
    try:
        rows = sweep(trajectories, grid, base, truth, provider, config.WORKERS)
    finally:
        if provider is not None:
            provider.close()
    write_sweep_csv(rows, args.out)

    best = best_row(rows)
    logger.info(f"Best {grid.param}={best.value} with cycle F1 {best.metrics.cycle.f1:.3f}")
    write_run_manifest(
        args.out,
        "sweep",
        {"input": args.input, "truth": args.truth, "output": args.out},
        config,
        {"trajectories": len(trajectories), "rows": len(rows), "param": grid.param, "values": grid.values},
    )
    return EXIT_OK


def cmd_eval(args: argparse.Namespace, config: Settings) -> int:
    records = read_predictions(args.pred)
    labels = load_labels(args.truth)
    predictions = {record.trace_id: record.label for record in records}
    metrics = score(predictions, binary_truth(labels))

    methods = sorted({record.method for record in records}, key=lambda m: m.value)
    if len(methods) == 1:
        method = methods[0]
        row = ReportRow(method.value.upper(), threshold_text(method, records[0].params), metrics)
    else:
        row = ReportRow("mixed", "-", metrics)

    sys.stdout.write(format_report([row], reference=args.reference))
    breakdown = class_breakdown(predictions, labels, load_variants(args.truth))
    for group, entry in breakdown.items():
        sys.stdout.write(f"  {group:<40} flagged {entry['flagged']:>4} / {entry['total']}\n")

    if args.json_out:
        payload = {**report_json([row]), "breakdown": breakdown}
        with open(args.json_out, "w", encoding="utf-8", newline="\n") as handle:
            json.dump(payload, handle, indent=2)
            handle.write("\n")

    write_run_manifest(
        args.json_out or args.pred.with_name(args.pred.name + ".eval"),
        "eval",
        {"predictions": args.pred, "truth": args.truth, "json": args.json_out},
        config,
        {"predictions": len(records), "methods": [method.value for method in methods]},
    )
    return EXIT_OK


def cmd_benchmark(args: argparse.Namespace, config: Settings) -> int:
    """Generate the corpus, run every detector at its defaults, sweep and report."""
    started = time.monotonic()
    out_dir: Path = args.out_dir
    out_dir.mkdir(parents=True, exist_ok=True)

    corpus_path = out_dir / "corpus.jsonl"
    manifest_path = out_dir / "corpus.manifest.json"
    generate_corpus(generator_spec(config), corpus_path, manifest_path, config.effective_config())
    trajectories = _load_corpus(corpus_path)
    labels = load_labels(manifest_path)
    truth = _truth_for(trajectories, manifest_path)
    variants = load_variants(manifest_path)

    provider = create_provider(config)
    rows: List[ReportRow] = []
    breakdowns: Dict[str, Dict[str, Dict[str, int]]] = {}
    costs: Dict[str, Dict[str, int]] = {}
    try:
        for method in DetectionMethod:
            detector = DetectorConfig.from_settings(config, method.value)
            detections = DetectionService(detector, provider, config.WORKERS).run(trajectories)
            write_predictions(detections, out_dir / f"predictions_{method.value}.jsonl")
            predictions = predictions_of(detections)
            rows.append(ReportRow(
                method.value.upper(),
                threshold_text(method, detections[0].params if detections else {}),
                score(predictions, truth),
            ))
            breakdowns[method.value] = class_breakdown(predictions, labels, variants)
            costs[method.value] = summarize(detections)

        for method, param, start, stop, step in BENCHMARK_GRIDS:
            grid = SweepGrid.from_range(method, param, start, stop, step)
            base = DetectorConfig.from_settings(config, method.value)
            sweep_rows = sweep(trajectories, grid, base, truth, provider, config.WORKERS)
            write_sweep_csv(sweep_rows, out_dir / f"sweep_{method.value}_{param}.csv")
    finally:
        provider.close()

    report = format_report(rows, reference=True)
    (out_dir / "report.txt").write_text(report, encoding="utf-8")
    with open(out_dir / "report.json", "w", encoding="utf-8", newline="\n") as handle:
        json.dump({**report_json(rows), "breakdown": breakdowns, "costs": costs}, handle, indent=2)
        handle.write("\n")
    sys.stdout.write(report)
    write_run_manifest(
        out_dir / "benchmark",
        "benchmark",
        {"out_dir": out_dir, "corpus": corpus_path, "truth": manifest_path},
        config,
        {"trajectories": len(trajectories), "costs": costs},
    )

    cdsa_calls = costs[DetectionMethod.CDSA.value]["embedding_calls"]
    hybrid_calls = costs[DetectionMethod.HYBRID.value]["embedding_calls"]
    if cdsa_calls:
        logger.info(f"Hybrid embedding calls: {hybrid_calls}/{cdsa_calls} of standalone CDSA")
    logger.info(f"Benchmark finished in {time.monotonic() - started:.1f}s, results in {out_dir}")
    return EXIT_OK


COMMANDS: Dict[str, Callable[[argparse.Namespace, Settings], int]] = {
    "generate": cmd_generate,
    "detect": cmd_detect,
    "sweep": cmd_sweep,
    "eval": cmd_eval,
    "benchmark": cmd_benchmark,
}


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=getattr(logging, (args.log_level or "INFO").upper(), logging.INFO),
        format=LOG_FORMAT,
        stream=sys.stderr,
        force=True,
    )

    try:
        config = resolve_settings(args)
    except (ValidationError, ParameterError, FileNotFoundError) as e:
        logger.error(f"Configuration error: {e}")
        return EXIT_CONFIG
    logging.getLogger().setLevel(config.LOG_LEVEL)

    try:
        return COMMANDS[args.command](args, config)
    except (ValidationError, ParameterError) as e:
        logger.error(f"Configuration error: {e}")
        return EXIT_CONFIG
    except (CycleDetectionError, OSError) as e:
        logger.error(f"{args.command} failed: {e}")
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
