"""Segmentation and tracking scores against ground truth.

Regions are matched per frame by the strict-majority rule: a truth
region pairs with the result region covering more than half of it, which
makes the match unique when it exists. SEG averages Jaccard overlap over
truth regions; DET and TRA price the graph edits needed to turn the
result into the truth (node splits, misses, spurious nodes, and for TRA
also edge deletions, additions, and kind changes), normalized by the
cost of building the truth from nothing.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, fields
from typing import Iterable, Mapping

import numpy as np

from .errors import MetricsError
from .lineage import LineageTable
from .volume import LabelVolume


@dataclass(frozen=True)
class AogmCosts:
    """Graph-edit prices: node split / false negative / false positive,
    edge delete / add / kind change."""

    ns: float = 5.0
    fn: float = 10.0
    fp: float = 1.0
    ed: float = 1.0
    ea: float = 1.5
    ec: float = 1.0

    def __post_init__(self) -> None:
        for f in fields(self):
            if getattr(self, f.name) < 0:
                raise ValueError(f"cost {f.name} must be >= 0")

    def as_dict(self) -> dict[str, float]:
        return {f.name: float(getattr(self, f.name)) for f in fields(self)}


@dataclass(frozen=True)
class _FrameMatch:
    """Strict-majority matching of one frame."""

    truth_labels: tuple[int, ...]
    result_labels: tuple[int, ...]
    # truth label -> (result label, intersection voxels)
    matches: dict[int, tuple[int, int]]
    truth_sizes: dict[int, int]
    result_sizes: dict[int, int]


def _check_frames(result: Iterable[LabelVolume], truth: Iterable[LabelVolume]) -> None:
    result = list(result)
    truth = list(truth)
    if len(result) != len(truth):
        raise MetricsError(f"frame count mismatch: {len(result)} result vs {len(truth)} truth")
    if not truth:
        raise MetricsError("no frames to score")
    for idx, (r, t) in enumerate(zip(result, truth)):
        if r.data.shape != t.data.shape:
            raise MetricsError(
                f"frame {idx} dims differ: result {r.data.shape} vs truth {t.data.shape}"
            )


def _match_frame(truth: LabelVolume, result: LabelVolume) -> _FrameMatch:
    tf = truth.data.ravel().astype(np.int64)
    rf = result.data.ravel().astype(np.int64)
    base = int(rf.max()) + 1
    joint = np.bincount(tf * base + rf)
    keys = np.nonzero(joint)[0]

    truth_counts = np.bincount(tf)
    result_counts = np.bincount(rf)
    truth_labels = tuple(int(l) for l in np.nonzero(truth_counts)[0] if l > 0)
    result_labels = tuple(int(l) for l in np.nonzero(result_counts)[0] if l > 0)

    overlaps: dict[int, list[tuple[int, int]]] = {}
    for k in keys:
        u, r = int(k) // base, int(k) % base
        if u > 0 and r > 0:
            overlaps.setdefault(u, []).append((r, int(joint[k])))

    matches: dict[int, tuple[int, int]] = {}
    for u in truth_labels:
        half = truth_counts[u] / 2.0
        winners = [(r, inter) for r, inter in overlaps.get(u, []) if inter > half]
        assert len(winners) <= 1, "strict majority admits at most one match"
        if winners:
            matches[u] = winners[0]
    return _FrameMatch(
        truth_labels,
        result_labels,
        matches,
        {u: int(truth_counts[u]) for u in truth_labels},
        {r: int(result_counts[r]) for r in result_labels},
    )


def seg_score(result: list[LabelVolume], truth: list[LabelVolume]) -> float:
    """Mean Jaccard overlap over all truth regions, 0 for unmatched ones."""
    _check_frames(result, truth)
    total = 0.0
    n_regions = 0
    for r, t in zip(result, truth):
        m = _match_frame(t, r)
        for u in m.truth_labels:
            n_regions += 1
            if u in m.matches:
                s, inter = m.matches[u]
                union = m.truth_sizes[u] + m.result_sizes[s] - inter
                total += inter / union
    if n_regions == 0:
        raise MetricsError("ground truth contains no regions")
    return total / n_regions


def _node_costs(matches: list[_FrameMatch], costs: AogmCosts) -> tuple[float, int]:
    """(weighted node-edit cost, total truth nodes) over all frames."""
    cost = 0.0
    n_truth = 0
    for m in matches:
        n_truth += len(m.truth_labels)
        claimed: dict[int, int] = {}
        for u in m.truth_labels:
            if u in m.matches:
                r = m.matches[u][0]
                claimed[r] = claimed.get(r, 0) + 1
            else:
                cost += costs.fn
        for r in m.result_labels:
            k = claimed.get(r, 0)
            if k == 0:
                cost += costs.fp
            elif k > 1:
                cost += costs.ns * (k - 1)
    return cost, n_truth


def det_score(
    result: list[LabelVolume], truth: list[LabelVolume], costs: AogmCosts = AogmCosts()
) -> float:
    """1 - (node edit cost) / (cost of detecting everything from scratch)."""
    _check_frames(result, truth)
    matches = [_match_frame(t, r) for r, t in zip(result, truth)]
    cost, n_truth = _node_costs(matches, costs)
    if n_truth == 0:
        raise MetricsError("ground truth contains no regions")
    build_all = costs.fn * n_truth
    if build_all == 0:
        raise MetricsError("fn cost of 0 makes the detection score undefined")
    return 1.0 - min(cost, build_all) / build_all


Node = tuple[int, int]  # (frame, label)
Edge = tuple[Node, Node]


def _lineage_edges(table: LineageTable) -> dict[Edge, str]:
    """Temporal links within tracks plus parent links, with their kind."""
    edges: dict[Edge, str] = {}
    rows = {r.id: r for r in table.tracks}
    for r in table.tracks:
        for f in range(r.begin, r.end):
            edges[((f, r.id), (f + 1, r.id))] = "link"
        if r.parent:
            p = rows[r.parent]
            edges[((p.end, p.id), (r.begin, r.id))] = "parent"
    return edges


def _check_lineage_consistency(
    frames: list[LabelVolume], table: LineageTable, what: str
) -> None:
    for f, vol in enumerate(frames):
        in_mask = {int(l) for l in vol.labels()}
        in_table = {r.id for r in table.active_at(f)}
        if in_mask != in_table:
            raise MetricsError(
                f"{what} lineage inconsistent with masks at frame {f}: "
                f"mask labels {sorted(in_mask)} vs active tracks {sorted(in_table)}"
            )


def tra_score(
    result: list[LabelVolume],
    result_lineage: LineageTable,
    truth: list[LabelVolume],
    truth_lineage: LineageTable,
    costs: AogmCosts = AogmCosts(),
) -> float:
    """1 - (graph edit cost) / (cost of building the truth graph from scratch)."""
    _check_frames(result, truth)
    _check_lineage_consistency(result, result_lineage, "result")
    _check_lineage_consistency(truth, truth_lineage, "truth")

    matches = [_match_frame(t, r) for r, t in zip(result, truth)]
    node_cost, n_truth = _node_costs(matches, costs)
    if n_truth == 0:
        raise MetricsError("ground truth contains no regions")

    # truth nodes claiming each result node, per frame
    claims: list[dict[int, list[int]]] = []
    for m in matches:
        inv: dict[int, list[int]] = {}
        for u, (r, _) in m.matches.items():
            inv.setdefault(r, []).append(u)
        claims.append(inv)

    truth_edges = _lineage_edges(truth_lineage)
    result_edges = _lineage_edges(result_lineage)

    realized: dict[Edge, list[str]] = {}
    edge_cost = 0.0
    for ((f1, r1), (f2, r2)), kind in sorted(result_edges.items()):
        hits = []
        for u1 in claims[f1].get(r1, []):
            for u2 in claims[f2].get(r2, []):
                key = ((f1, u1), (f2, u2))
                if key in truth_edges:
                    hits.append(key)
        if not hits:
            edge_cost += costs.ed
        for key in hits:
            realized.setdefault(key, []).append(kind)

    for key, kind in truth_edges.items():
        kinds = realized.get(key)
        if kinds is None:
            edge_cost += costs.ea
        elif kind not in kinds:
            edge_cost += costs.ec

    build_all = costs.fn * n_truth + costs.ea * len(truth_edges)
    if build_all == 0:
        raise MetricsError("zero-cost truth graph makes the tracking score undefined")
    total = node_cost + edge_cost
    return 1.0 - min(total, build_all) / build_all


def op_scores(det: float, seg: float, tra: float) -> tuple[float, float]:
    """Challenge summary pair: (mean of det and seg, mean of seg and tra)."""
    for name, value in (("det", det), ("seg", seg), ("tra", tra)):
        if not 0.0 <= value <= 1.0:
            raise ValueError(f"{name} must lie in [0, 1], got {value}")
    return (det + seg) / 2.0, (seg + tra) / 2.0


def format_report(scores: Mapping[str, float], costs: AogmCosts | None = None) -> str:
    """Flat key=value lines, scores first, then the cost weights used."""
    lines = [f"{key}={scores[key]:.6f}" for key in scores]
    if costs is not None:
        lines += [f"cost_{name}={value:g}" for name, value in costs.as_dict().items()]
    return "\n".join(lines) + "\n"


def format_report_json(scores: Mapping[str, float], costs: AogmCosts | None = None) -> str:
    doc: dict = {"scores": {k: float(v) for k, v in scores.items()}}
    if costs is not None:
        doc["aogm_costs"] = costs.as_dict()
    return json.dumps(doc, indent=2, sort_keys=True) + "\n"