"""Supervoxel-based boundary correction.

Replaces each watershed region's boundary with supervoxel boundaries:
count the voxel overlap of every supervoxel with every watershed label
(background included), then relabel each supervoxel wholly to the label
it overlaps most. Nuclei interiors keep their watershed identity while
the outline snaps to supervoxel edges, which adhere to image gradients.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from types import MappingProxyType
from typing import Mapping

import numpy as np

from .volume import LabelVolume

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class CorrelationTable:
    """Sparse overlap counts: (supervoxel label, region label) -> voxels.

    Region label 0 is background and participates like any other label;
    zero-count pairs are absent. Row sums equal supervoxel sizes.
    """

    entries: Mapping[tuple[int, int], int]

    def __post_init__(self) -> None:
        object.__setattr__(self, "entries", MappingProxyType(dict(self.entries)))
        for (i, j), count in self.entries.items():
            if i < 1 or j < 0 or count < 1:
                raise ValueError(f"bad correlation entry ({i}, {j}) -> {count}")

    def __len__(self) -> int:
        return len(self.entries)

    def supervoxel_labels(self) -> list[int]:
        return sorted({i for i, _ in self.entries})

    def row(self, supervoxel: int) -> dict[int, int]:
        """All region overlaps of one supervoxel."""
        return {j: c for (i, j), c in self.entries.items() if i == supervoxel}

    def supervoxel_size(self, supervoxel: int) -> int:
        return sum(c for (i, _), c in self.entries.items() if i == supervoxel)

    def best_region(self, supervoxel: int) -> int:
        """Overlap argmax with ties toward background, then the lower label."""
        row = self.row(supervoxel)
        if not row:
            raise KeyError(f"supervoxel {supervoxel} not in table")
        top = max(row.values())
        winners = [j for j, c in row.items() if c == top]
        if 0 in winners:
            return 0
        return min(winners)


def cluster_correlation(sv: LabelVolume, ws: LabelVolume) -> CorrelationTable:
    """Exact voxel-count overlap of every supervoxel with every region.

    Supervoxel label 0 (uncovered voxels) is not tallied; region label 0
    is, so supervoxels lying mostly outside any region can be suppressed.
    """
    if sv.data.shape != ws.data.shape:
        raise ValueError(f"shape mismatch: {sv.data.shape} vs {ws.data.shape}")
    svf = sv.data.ravel().astype(np.int64)
    wsf = ws.data.ravel().astype(np.int64)
    base = int(wsf.max()) + 1
    joint = np.bincount(svf * base + wsf, minlength=base)
    keys = np.nonzero(joint)[0]
    entries = {
        (int(k // base), int(k % base)): int(joint[k]) for k in keys if k >= base
    }
    return CorrelationTable(entries)


def correct_boundaries(
    sv: LabelVolume, ws: LabelVolume, table: CorrelationTable
) -> LabelVolume:
    """Relabel each supervoxel wholly to its best-overlap region.

    The output is a union of intact supervoxels per region, keeping the
    region label ids. Regions that win no supervoxel disappear; they are
    logged as dropped detections.
    """
    if sv.data.shape != ws.data.shape:
        raise ValueError(f"shape mismatch: {sv.data.shape} vs {ws.data.shape}")
    sv_labels = sv.labels()
    table_labels = table.supervoxel_labels()
    if list(sv_labels) != table_labels:
        raise ValueError("correlation table does not match the supervoxel labeling")

    n_sv = int(sv_labels.max()) if sv_labels.size else 0
    top = np.zeros(n_sv + 1, dtype=np.int64)
    winner = np.full(n_sv + 1, -1, dtype=np.int64)
    # Visit rows in ascending region order; strict > keeps the first
    # (lowest) region on ties and background (0) comes first of all.
    for (i, j), count in sorted(table.entries.items(), key=lambda kv: (kv[0][1], kv[0][0])):
        if count > top[i]:
            top[i] = count
            winner[i] = j
    winner[winner < 0] = 0  # uncovered supervoxel ids, incl. index 0

    out = winner[sv.data]
    kept = set(np.unique(out).tolist())
    dropped = [int(l) for l in ws.labels() if int(l) not in kept]
    if dropped:
        shown = ", ".join(str(l) for l in dropped[:20])
        more = "" if len(dropped) <= 20 else f" (+{len(dropped) - 20} more)"
        log.warning("%d region(s) won no supervoxel and were dropped: %s%s",
                    len(dropped), shown, more)
    return ws.like(out.astype(np.int32))

def format_table(table: CorrelationTable) -> str:
    """One "supervoxel region count" line per overlap pair, sorted."""
    lines = [f"{i} {j} {count}" for (i, j), count in sorted(table.entries.items())]
    return "".join(line + "\n" for line in lines)
