"""Frame-to-frame nucleus linking and lineage inference.

Each nucleus is summarized by three features: physical volume, adjacency
degree, and mean adjacency weight. Consecutive frames are linked by
greedily accepting the globally most similar pairs below a threshold;
unmatched nuclei close or open tracks, and a track that closes while two
or more new tracks appear inside its dilated region becomes a division.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from .adjacency import DEFAULT_MAX_RADIUS, NucleiGraph, build_graph
from .errors import UnknownLabelError
from .lineage import LineageTable, TrackRow
from .volume import Connectivity, LabelVolume, dilate_binary

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class TrackFeature:
    label: int
    vol: float  # physical volume, cubic microns
    deg: int  # adjacency degree
    wdeg: float  # mean incident edge weight; 0.0 for isolated nuclei

    def __post_init__(self) -> None:
        if self.vol <= 0:
            raise ValueError(f"vol must be positive, got {self.vol}")
        if self.deg < 0:
            raise ValueError(f"deg must be >= 0, got {self.deg}")
        if self.deg > 0 and self.wdeg < 1:
            raise ValueError(f"wdeg must be >= 1 when connected, got {self.wdeg}")


@dataclass(frozen=True)
class TrackerConfig:
    threshold: float = 1.0  # links need sim strictly below this
    max_radius: int = DEFAULT_MAX_RADIUS  # adjacency dilation cap
    division_radius: int | None = None  # parent search reach; None = max_radius

    def __post_init__(self) -> None:
        if self.threshold <= 0:
            raise ValueError(f"threshold must be positive, got {self.threshold}")
        if self.max_radius < 1:
            raise ValueError(f"max_radius must be >= 1, got {self.max_radius}")
        if self.division_radius is not None and self.division_radius < 1:
            raise ValueError(f"division_radius must be >= 1, got {self.division_radius}")


def compute_features(labels: LabelVolume, graph: NucleiGraph) -> list[TrackFeature]:
    """Per-nucleus feature rows in ascending label order."""
    counts = np.bincount(labels.data.ravel())
    vv = labels.voxel_volume
    out = []
    for v in graph.vertices:
        out.append(
            TrackFeature(v, float(counts[v]) * vv, graph.degree(v), graph.weighted_degree(v))
        )
    return out


def _term(ref: float, val: float) -> float:
    if ref != 0:
        return abs(ref - val) / ref
    return 0.0 if val == 0 else 1.0


def similarity(a: TrackFeature, b: TrackFeature) -> float:
    """Relative feature change from a (reference frame t) to b (frame t+1).

    Asymmetric on purpose: denominators come from the reference. A zero
    reference denominator contributes 0 when both values are zero, else 1.
    """
    return _term(a.vol, b.vol) + _term(float(a.deg), float(b.deg)) + _term(a.wdeg, b.wdeg)


def link_frames(
    feats_t: list[TrackFeature], feats_t1: list[TrackFeature], threshold: float = 1.0
) -> dict[int, int]:
    """One-to-one partial matching of nucleus labels between two frames.

    Candidate pairs are taken in ascending similarity (ties: lower frame-t
    label, then lower frame-t1 label); a pair is accepted when both sides
    are still free and its similarity is strictly below the threshold.
    """
    if threshold <= 0:
        raise ValueError(f"threshold must be positive, got {threshold}")
    if not feats_t or not feats_t1:
        return {}
    candidates = []
    for a in feats_t:
        for b in feats_t1:
            s = similarity(a, b)
            if s < threshold:
                candidates.append((s, a.label, b.label))
    candidates.sort()
    taken_t: set[int] = set()
    taken_t1: set[int] = set()
    links: dict[int, int] = {}
    for _, la, lb in candidates:
        if la in taken_t or lb in taken_t1:
            continue
        taken_t.add(la)
        taken_t1.add(lb)
        links[la] = lb
    return links


class _Track:
    __slots__ = ("id", "begin", "end", "parent", "label")

    def __init__(self, id: int, begin: int, label: int):
        self.id = id
        self.begin = begin
        self.end = begin
        self.parent = 0
        self.label = label


def _attribute_divisions(
    closed: list[_Track],
    opened: list[_Track],
    prev: LabelVolume,
    cur: LabelVolume,
    radius: int,
) -> None:
    """Parent assignment for tracks opened right after others closed.

    Each new track commits to the closed track whose dilated region
    overlaps it most (ties: lower track id); a closed track with at least
    two committed children divides and the children keep its id as parent.
    """
    if not closed or len(opened) < 2:
        return
    reach = {}
    for track in closed:
        mask = LabelVolume((prev.data == track.label).astype(np.int32), prev.spacing)
        reach[track.id] = dilate_binary(mask, Connectivity.FACE_6, radius).data > 0

    commits: dict[int, list[_Track]] = {}
    for child in opened:
        child_mask = cur.data == child.label
        best_id = 0
        best_overlap = 0
        for track in closed:  # ascending id: earlier track wins exact ties
            overlap = int((reach[track.id] & child_mask).sum())
            if overlap > best_overlap:
                best_overlap = overlap
                best_id = track.id
        if best_id:
            commits.setdefault(best_id, []).append(child)

    for parent_id, children in commits.items():
        if len(children) >= 2:
            for child in children:
                child.parent = parent_id


@dataclass(frozen=True)
class TrackingResult:
    """Lineage plus, per frame, the mask-label -> track-id mapping."""

    table: LineageTable
    frame_labels: tuple[dict[int, int], ...]


def relabel_by_track(mask: LabelVolume, mapping: dict[int, int]) -> LabelVolume:
    """Rewrite mask labels as track ids; labels outside the mapping become 0."""
    top = int(mask.data.max()) if mask.data.size else 0
    lut = np.zeros(top + 1, dtype=np.int32)
    for label, track_id in mapping.items():
        if label > top:
            raise UnknownLabelError(f"label {label} not present in the mask")
        lut[label] = track_id
    return mask.like(lut[mask.data])


def track_sequence(frames: list[LabelVolume], cfg: TrackerConfig = TrackerConfig()) -> TrackingResult:
    """Link a whole sequence and emit its lineage table.

    Unmatched old nuclei close their track (apoptosis or leaving the
    view); unmatched new nuclei open one (entry, or division when they
    fall inside a just-closed track's dilated region alongside a sibling).
    """
    if not frames:
        raise ValueError("need at least one frame")
    dims = frames[0].data.shape
    for f in frames[1:]:
        if f.data.shape != dims:
            raise ValueError(f"frame dims differ: {f.data.shape} vs {dims}")
    division_radius = cfg.division_radius if cfg.division_radius is not None else cfg.max_radius

    def frame_features(vol: LabelVolume) -> dict[int, TrackFeature]:
        if vol.labels().size == 0:
            return {}
        graph = build_graph(vol, cfg.max_radius)
        return {f.label: f for f in compute_features(vol, graph)}

    tracks: list[_Track] = []
    next_id = 1
    feats = frame_features(frames[0])
    active: dict[int, _Track] = {}
    for label in sorted(feats):
        t = _Track(next_id, 0, label)
        next_id += 1
        tracks.append(t)
        active[label] = t
    frame_labels = [{label: tr.id for label, tr in active.items()}]

    for t_idx in range(1, len(frames)):
        prev_feats = feats
        feats = frame_features(frames[t_idx])
        links = link_frames(list(prev_feats.values()), list(feats.values()), cfg.threshold)

        closed = [tr for label, tr in sorted(active.items()) if label not in links]
        next_active: dict[int, _Track] = {}
        for old_label, new_label in links.items():
            tr = active[old_label]
            tr.end = t_idx
            tr.label = new_label
            next_active[new_label] = tr

        opened = []
        for label in sorted(feats):
            if label in next_active:
                continue
            tr = _Track(next_id, t_idx, label)
            next_id += 1
            tracks.append(tr)
            opened.append(tr)
            next_active[label] = tr

        _attribute_divisions(closed, opened, frames[t_idx - 1], frames[t_idx], division_radius)
        active = next_active
        frame_labels.append({label: tr.id for label, tr in active.items()})

    n_div = sum(1 for t in tracks if t.parent)
    if n_div:
        log.info("lineage: %d track(s), %d with a division parent", len(tracks), n_div)
    table = LineageTable([TrackRow(t.id, t.begin, t.end, t.parent) for t in tracks])
    return TrackingResult(table, tuple(frame_labels))