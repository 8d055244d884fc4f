import json
import logging
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple

from src.generator.rng import Xoshiro256StarStar
from src.generator.templates import draw_trajectory
from src.models.corpus import CorpusManifest, GeneratorSpec, TraceMetadata
from src.models.models import GroundTruthClass, Trajectory
from src.services.trace_loader import write_trajectories

logger = logging.getLogger(__name__)


def build_corpus(spec: GeneratorSpec) -> Tuple[List[Trajectory], CorpusManifest]:
    """
    Draw the whole corpus in memory.

    Class order is shuffled once up front, then trajectories are drawn in
    that order from a single stream.
    """
    rng = Xoshiro256StarStar(spec.seed)
    schedule = [cls for cls in GroundTruthClass for _ in range(spec.counts.get(cls, 0))]
    rng.shuffle(schedule)

    trajectories: List[Trajectory] = []
    metadata: Dict[str, TraceMetadata] = {}
    for index, cls in enumerate(schedule):
        trajectory, meta = draw_trajectory(cls, rng, spec, index)
        trajectories.append(trajectory)
        metadata[trajectory.trace_id] = meta

    manifest = CorpusManifest(
        spec=spec,
        counts={cls: spec.counts.get(cls, 0) for cls in GroundTruthClass},
        labels={trace_id: meta.label for trace_id, meta in metadata.items()},
        metadata=metadata,
    )
    return trajectories, manifest


def write_manifest(manifest: CorpusManifest, path: Path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as handle:
        json.dump(manifest.model_dump(mode="json"), handle, indent=2)
        handle.write("\n")


def generate_corpus(
    spec: GeneratorSpec,
    out_path: Path,
    manifest_path: Optional[Path] = None,
    config: Optional[Dict[str, Any]] = None
) -> CorpusManifest:
    """
    Write a labeled corpus and its manifest.

    The corpus file is byte-identical for a given spec; only the
    manifest's ``generated_at`` changes between runs. ``config`` is
    recorded in the manifest so the run can be replayed.

    Raises:
        OSError: an output path is not writable
    """
    out_path = Path(out_path)
    manifest_path = Path(manifest_path) if manifest_path else default_manifest_path(out_path)

    trajectories, manifest = build_corpus(spec)
    if config:
        manifest = manifest.model_copy(update={"config": dict(config)})
    span_count = write_trajectories(trajectories, out_path)
    write_manifest(manifest, manifest_path)

    logger.info(
        f"Generated {len(trajectories)} trajectories ({span_count} spans) "
        f"with seed {spec.seed} into {out_path}"
    )
    return manifest


def default_manifest_path(out_path: Path) -> Path:
    return out_path.with_name(out_path.stem + ".manifest.json")
