"""Per-frame segmentation orchestration.

Each frame runs detection (or trusts the input as a probability map),
seeded watershed, supervoxel over-segmentation, and the boundary
correction step. The supervoxel count must reach the watershed region
count for correction to make sense, so the target k doubles until the
partition is fine enough.
"""

from __future__ import annotations

import logging
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .config import PipelineConfig
from .correction import CorrelationTable, cluster_correlation, correct_boundaries
from .detection import blob_probability_map, extract_seeds
from .slic import slic
from .volume import LabelVolume, Volume
from .watershed import watershed

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class FrameSegmentation:
    watershed: LabelVolume
    supervoxels: LabelVolume
    table: CorrelationTable
    corrected: LabelVolume
    slic_k: int  # target actually used after any automatic raise
    timings: dict[str, float]


def probability_map(frame: Volume, cfg: PipelineConfig) -> Volume:
    if cfg.detection_source == "file":
        return frame.require_probability()
    return blob_probability_map(frame, cfg.detection_scales)


def _empty_frame(frame: Volume) -> FrameSegmentation:
    zeros = LabelVolume(np.zeros(frame.data.shape, dtype=np.int32), frame.spacing)
    table = cluster_correlation(zeros, zeros)
    return FrameSegmentation(zeros, zeros, table, zeros, 0, {})


def segment_frame(frame: Volume, cfg: PipelineConfig) -> FrameSegmentation:
    timings: dict[str, float] = {}
    t0 = time.perf_counter()
    prob = probability_map(frame, cfg)
    seeds = extract_seeds(prob, cfg.detection_min_score, cfg.detection_min_separation)
    timings["detect"] = time.perf_counter() - t0
    if len(seeds) == 0:
        log.warning("no seeds detected; emitting an empty frame")
        return _empty_frame(frame)

    t0 = time.perf_counter()
    ws = watershed(prob, seeds, cfg.watershed_config())
    timings["watershed"] = time.perf_counter() - t0
    n_regions = len(ws.labels())

    t0 = time.perf_counter()
    n_vox = frame.data.size
    k = min(cfg.slic_k, n_vox)
    while True:
        sv = slic(frame, cfg.slic_config(k))
        if len(sv.labels()) >= n_regions or k >= n_vox:
            break
        k = min(2 * k, n_vox)
        log.info("supervoxel count below %d regions; raising target to %d", n_regions, k)
    timings["slic"] = time.perf_counter() - t0

    t0 = time.perf_counter()
    table = cluster_correlation(sv, ws)
    corrected = correct_boundaries(sv, ws, table) if cfg.correction_enabled else ws
    timings["correct"] = time.perf_counter() - t0

    log.info(
        "frame: %d nuclei, %d supervoxels (k=%d); detect=%.3fs watershed=%.3fs "
        "slic=%.3fs correct=%.3fs",
        n_regions,
        len(sv.labels()),
        k,
        timings["detect"],
        timings["watershed"],
        timings["slic"],
        timings["correct"],
    )
    return FrameSegmentation(ws, sv, table, corrected, k, timings)


def segment_sequence(
    frames: list[Volume], cfg: PipelineConfig, threads: int = 1
) -> list[FrameSegmentation]:
    """Segment every frame, optionally on a bounded worker pool.

    Results come back in frame order regardless of thread count, and each
    frame's computation is independent, so the output is identical to the
    sequential run.
    """
    if threads < 1:
        raise ValueError(f"threads must be >= 1, got {threads}")
    if threads == 1 or len(frames) <= 1:
        return [segment_frame(f, cfg) for f in frames]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(lambda f: segment_frame(f, cfg), frames))
