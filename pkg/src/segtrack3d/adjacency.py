"""Per-frame nuclei adjacency graph weighted by dilation distance.

The weight of an edge (i, j) is the smallest number of dilations of the
two nuclei's union mask after which they form a single face-connected
component, capped at a configurable radius. Nuclei already touching get
the minimum weight 1, which keeps weighted degrees at least 1.

Batch construction dilates every nucleus once per radius step and only
runs the exact single-component test on pairs whose dilated masks are in
face contact, which is necessary for the union to be one component, so
the result equals the pairwise definition while skipping almost all of
the redundant dilation work.
"""

from __future__ import annotations

from dataclasses import dataclass
from types import MappingProxyType
from typing import Iterator, Mapping

import numpy as np
from scipy import ndimage

from .errors import UnknownLabelError
from .volume import Connectivity, LabelVolume

DEFAULT_MAX_RADIUS = 10

_STRUCTURE = Connectivity.FACE_6.structure()


@dataclass(frozen=True)
class NucleiGraph:
    """Undirected weighted adjacency between nuclei of one frame."""

    vertices: tuple[int, ...]
    edges: Mapping[tuple[int, int], int]  # (i, j) with i < j -> dilation count
    max_radius: int

    def __post_init__(self) -> None:
        if self.max_radius < 1:
            raise ValueError(f"max_radius must be >= 1, got {self.max_radius}")
        verts = tuple(sorted(int(v) for v in self.vertices))
        if len(set(verts)) != len(verts) or any(v < 1 for v in verts):
            raise ValueError("vertices must be unique positive labels")
        object.__setattr__(self, "vertices", verts)
        vset = set(verts)
        edges = {}
        for (i, j), w in self.edges.items():
            if i >= j:
                raise ValueError(f"edge ({i}, {j}) must be ordered i < j")
            if i not in vset or j not in vset:
                raise ValueError(f"edge ({i}, {j}) references unknown vertex")
            if not 1 <= w <= self.max_radius:
                raise ValueError(f"edge ({i}, {j}) weight {w} outside [1, {self.max_radius}]")
            edges[(int(i), int(j))] = int(w)
        object.__setattr__(self, "edges", MappingProxyType(edges))

    def weight(self, i: int, j: int) -> int | None:
        if i == j:
            return None
        key = (i, j) if i < j else (j, i)
        return self.edges.get(key)

    def neighbors(self, i: int) -> list[int]:
        out = [j for (a, j) in self.edges if a == i]
        out += [a for (a, j) in self.edges if j == i]
        return sorted(out)

    def degree(self, i: int) -> int:
        if i not in set(self.vertices):
            raise UnknownLabelError(f"vertex {i} not in graph")
        return sum(1 for (a, b) in self.edges if i in (a, b))

    def weighted_degree(self, i: int) -> float:
        """Mean edge weight over incident edges; 0.0 for isolated vertices."""
        deg = self.degree(i)
        if deg == 0:
            return 0.0
        total = sum(w for (a, b), w in self.edges.items() if i in (a, b))
        return total / deg

    def __iter__(self) -> Iterator[tuple[int, int, int]]:
        for (i, j), w in sorted(self.edges.items()):
            yield i, j, w


def min_dilation_distance(labels: LabelVolume, i: int, j: int, max_radius: int = DEFAULT_MAX_RADIUS) -> int | None:
    """Dilations of the (i, j) union mask until one connected component.

    None when the cap is reached first. Touching nuclei report 1: the
    union is already connected after the first dilation (and before it).
    """
    if i == j:
        raise ValueError("nuclei must differ")
    if max_radius < 1:
        raise ValueError(f"max_radius must be >= 1, got {max_radius}")
    present = set(labels.labels().tolist())
    for lab in (i, j):
        if lab not in present:
            raise UnknownLabelError(f"label {lab} absent from volume")

    union = (labels.data == i) | (labels.data == j)
    # Work inside the union bbox padded by the cap; dilation cannot reach
    # farther, so connectivity there matches the full volume.
    coords = np.argwhere(union)
    lo = np.maximum(coords.min(axis=0) - max_radius, 0)
    hi = np.minimum(coords.max(axis=0) + max_radius + 1, union.shape)
    window = tuple(slice(a, b) for a, b in zip(lo, hi))
    mask = union[window]
    for d in range(1, max_radius + 1):
        mask = ndimage.binary_dilation(mask, structure=_STRUCTURE)
        _, n = ndimage.label(mask, structure=_STRUCTURE)
        if n == 1:
            return d
    return None


class _GrowingMask:
    """A nucleus mask dilated in place one step at a time, tracked with
    its own origin so only the populated window is stored."""

    __slots__ = ("origin", "mask")

    def __init__(self, labels: np.ndarray, label: int):
        coords = np.argwhere(labels == label)
        self.origin = coords.min(axis=0)
        hi = coords.max(axis=0) + 1
        self.mask = np.zeros(tuple(hi - self.origin), dtype=bool)
        local = coords - self.origin
        self.mask[local[:, 0], local[:, 1], local[:, 2]] = True

    def grow(self, shape: tuple[int, ...]) -> None:
        padded = np.pad(self.mask, 1)
        padded = ndimage.binary_dilation(padded, structure=_STRUCTURE)
        origin = self.origin - 1
        # clip back to the volume
        lo = np.maximum(origin, 0)
        hi = np.minimum(origin + padded.shape, shape)
        window = tuple(slice(a - o, b - o) for a, b, o in zip(lo, hi, origin))
        self.mask = padded[window]
        self.origin = lo

    def bounds(self) -> tuple[np.ndarray, np.ndarray]:
        return self.origin, self.origin + self.mask.shape


def _boxes_touch(a: _GrowingMask, b: _GrowingMask) -> bool:
    alo, ahi = a.bounds()
    blo, bhi = b.bounds()
    return bool(np.all(ahi + 1 > blo) and np.all(bhi + 1 > alo))


def _contact(a: _GrowingMask, b: _GrowingMask) -> bool:
    """True when some voxel of a overlaps or is face-adjacent to one of b."""
    alo, ahi = a.bounds()
    blo, bhi = b.bounds()
    lo = np.maximum(alo - 1, blo)
    hi = np.minimum(ahi + 1, bhi)
    if np.any(lo >= hi):
        return False
    halo = np.pad(a.mask, 1)
    halo = ndimage.binary_dilation(halo, structure=_STRUCTURE)
    a0 = alo - 1
    crop_a = halo[tuple(slice(l - o, h - o) for l, h, o in zip(lo, hi, a0))]
    crop_b = b.mask[tuple(slice(l - o, h - o) for l, h, o in zip(lo, hi, blo))]
    return bool(np.any(crop_a & crop_b))


def _union_is_single(a: _GrowingMask, b: _GrowingMask) -> bool:
    alo, ahi = a.bounds()
    blo, bhi = b.bounds()
    lo = np.minimum(alo, blo)
    hi = np.maximum(ahi, bhi)
    joint = np.zeros(tuple(hi - lo), dtype=bool)
    joint[tuple(slice(l - o, h - o) for l, h, o in zip(alo, ahi, lo))] |= a.mask
    joint[tuple(slice(l - o, h - o) for l, h, o in zip(blo, bhi, lo))] |= b.mask
    _, n = ndimage.label(joint, structure=_STRUCTURE)
    return n == 1


def build_graph(labels: LabelVolume, max_radius: int = DEFAULT_MAX_RADIUS) -> NucleiGraph:
    """Adjacency over all nuclei of the frame.

    Each nucleus is dilated once per radius step; a pair is settled the
    first step its union becomes a single component. Face contact between
    the dilated masks gates the exact component test: without contact the
    union cannot be connected, and the exact test still decides pairs
    whose own masks are disconnected.
    """
    verts = [int(v) for v in labels.labels()]
    if not verts:
        raise UnknownLabelError("no nuclei present")
    masks = {v: _GrowingMask(labels.data, v) for v in verts}
    pairs = [(a, b) for idx, a in enumerate(verts) for b in verts[idx + 1:]]
    edges: dict[tuple[int, int], int] = {}
    shape = labels.data.shape
    for d in range(1, max_radius + 1):
        for m in masks.values():
            m.grow(shape)
        for i, j in pairs:
            if (i, j) in edges:
                continue
            a, b = masks[i], masks[j]
            if not _boxes_touch(a, b):
                continue
            if _contact(a, b) and _union_is_single(a, b):
                edges[(i, j)] = d
    return NucleiGraph(tuple(verts), edges, max_radius)


def dump_graph(graph: NucleiGraph) -> str:
    """Edge-list text form: radius and vertices headers, then "i j w" lines."""
    lines = [f"radius {graph.max_radius}"]
    lines.append("vertices " + " ".join(str(v) for v in graph.vertices))
    for i, j, w in graph:
        lines.append(f"{i} {j} {w}")
    return "\n".join(lines) + "\n"


def parse_graph(text: str) -> NucleiGraph:
    lines = [ln.strip() for ln in text.splitlines() if ln.strip() and not ln.startswith("#")]
    if len(lines) < 2 or not lines[0].startswith("radius ") or not lines[1].startswith("vertices"):
        raise ValueError("graph text needs 'radius R' and 'vertices ...' headers")
    radius = int(lines[0].split()[1])
    verts = tuple(int(v) for v in lines[1].split()[1:])
    edges = {}
    for ln in lines[2:]:
        parts = ln.split()
        if len(parts) != 3:
            raise ValueError(f"bad edge line: {ln!r}")
        i, j, w = (int(p) for p in parts)
        edges[(i, j)] = w
    return NucleiGraph(verts, edges, radius)