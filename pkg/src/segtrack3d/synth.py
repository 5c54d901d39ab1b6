"""Scripted synthetic sequences with exact ground truth.

Cells are axis-aligned ellipsoids in physical coordinates. A JSON script
fixes their initial geometry, drift, division and disappearance events,
and the noise model; the generator rasterizes each frame into an
intensity volume (clamped quadratic falloff per cell plus noise) and an
exact membership label volume, and emits the lineage the script implies.
Everything is deterministic for a given script, including noise, which
is drawn from a per-frame child of the script seed.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import ConfigError
from .lineage import LineageTable, TrackRow
from .volume import LabelVolume, Volume

Triple = tuple[float, float, float]


@dataclass(frozen=True)
class DivisionScript:
    frame: int  # first frame of the two children
    offsets: tuple[Triple, Triple]  # child center shifts, physical
    radii_scale: float = 0.7

    def __post_init__(self) -> None:
        if self.frame < 1:
            raise ConfigError(f"division frame must be >= 1, got {self.frame}")
        if len(self.offsets) != 2:
            raise ConfigError("division needs exactly two child offsets")
        if not 0 < self.radii_scale <= 1:
            raise ConfigError(f"radii_scale must be in (0, 1], got {self.radii_scale}")


@dataclass(frozen=True)
class CellScript:
    id: int
    center: Triple  # physical (x, y, z), microns
    radii: Triple  # physical semi-axes
    peak: float = 0.9
    drift: Triple = (0.0, 0.0, 0.0)  # physical shift per frame
    appear: int = 0
    divide: DivisionScript | None = None
    vanish: int | None = None  # first frame the cell is gone

    def __post_init__(self) -> None:
        if self.id < 1:
            raise ConfigError(f"cell id must be positive, got {self.id}")
        if any(r <= 0 for r in self.radii):
            raise ConfigError(f"cell {self.id}: radii must be positive")
        if not 0 < self.peak <= 1:
            raise ConfigError(f"cell {self.id}: peak must be in (0, 1]")
        if self.appear < 0:
            raise ConfigError(f"cell {self.id}: appear must be >= 0")
        if self.divide is not None and self.vanish is not None:
            raise ConfigError(f"cell {self.id}: cannot both divide and vanish")
        if self.divide is not None and self.divide.frame <= self.appear:
            raise ConfigError(f"cell {self.id}: division before the cell exists")
        if self.vanish is not None and self.vanish <= self.appear:
            raise ConfigError(f"cell {self.id}: vanish before the cell exists")


@dataclass(frozen=True)
class SequenceScript:
    dims: tuple[int, int, int]  # (nx, ny, nz)
    frames: int
    cells: tuple[CellScript, ...]
    spacing: Triple = (0.09, 0.09, 1.0)
    seed: int = 0
    noise: float = 0.0
    noise_kind: str = "gaussian"  # or "uniform"
    edge_sharpness: float = 4.0  # slope of the intensity falloff at the rim

    def __post_init__(self) -> None:
        if len(self.dims) != 3 or any(d < 1 for d in self.dims):
            raise ConfigError(f"dims must be three positive ints, got {self.dims!r}")
        if self.frames < 1:
            raise ConfigError(f"frames must be >= 1, got {self.frames}")
        if not self.cells:
            raise ConfigError("script needs at least one cell")
        ids = [c.id for c in self.cells]
        if len(set(ids)) != len(ids):
            raise ConfigError("cell ids must be unique")
        if self.noise < 0:
            raise ConfigError(f"noise must be >= 0, got {self.noise}")
        if self.noise_kind not in ("gaussian", "uniform"):
            raise ConfigError(f"noise_kind must be gaussian or uniform, got {self.noise_kind!r}")
        if self.edge_sharpness <= 0:
            raise ConfigError(f"edge_sharpness must be positive, got {self.edge_sharpness}")
        for cell in self.cells:
            if cell.divide is not None and cell.divide.frame >= self.frames:
                raise ConfigError(f"cell {cell.id}: division frame beyond the sequence")


@dataclass(frozen=True)
class SyntheticSequence:
    intensity: tuple[Volume, ...]
    truth: tuple[LabelVolume, ...]
    lineage: LineageTable
    metadata: dict = field(default_factory=dict)


def _triple(value, what: str) -> Triple:
    if not isinstance(value, (list, tuple)) or len(value) != 3:
        raise ConfigError(f"{what} must be a 3-element list, got {value!r}")
    return (float(value[0]), float(value[1]), float(value[2]))


def parse_script(text: str) -> SequenceScript:
    """Parse the JSON script format (see the README for the schema)."""
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"script is not valid JSON: {exc}") from exc
    if not isinstance(doc, dict):
        raise ConfigError("script must be a JSON object")
    known = {"dims", "frames", "cells", "spacing", "seed", "noise", "noise_kind", "edge_sharpness"}
    unknown = set(doc) - known
    if unknown:
        raise ConfigError(f"unknown script keys: {sorted(unknown)}")
    try:
        dims = tuple(int(d) for d in doc["dims"])
        frames = int(doc["frames"])
        raw_cells = doc["cells"]
    except KeyError as exc:
        raise ConfigError(f"script is missing required key {exc}") from exc
    if not isinstance(raw_cells, list):
        raise ConfigError("cells must be a list of objects")

    cells = []
    for raw in raw_cells:
        if not isinstance(raw, dict):
            raise ConfigError(f"cell entry must be an object, got {raw!r}")
        cell_known = {"id", "center", "radii", "peak", "drift", "appear", "divide", "vanish"}
        bad = set(raw) - cell_known
        if bad:
            raise ConfigError(f"unknown cell keys: {sorted(bad)}")
        try:
            divide = None
            if raw.get("divide") is not None:
                d = raw["divide"]
                divide = DivisionScript(
                    frame=int(d["frame"]),
                    offsets=(
                        _triple(d["offsets"][0], "child offset"),
                        _triple(d["offsets"][1], "child offset"),
                    ),
                    radii_scale=float(d.get("radii_scale", 0.7)),
                )
            cells.append(
                CellScript(
                    id=int(raw["id"]),
                    center=_triple(raw["center"], "center"),
                    radii=_triple(raw["radii"], "radii"),
                    peak=float(raw.get("peak", 0.9)),
                    drift=_triple(raw.get("drift", (0, 0, 0)), "drift"),
                    appear=int(raw.get("appear", 0)),
                    divide=divide,
                    vanish=int(raw["vanish"]) if raw.get("vanish") is not None else None,
                )
            )
        except (KeyError, IndexError, TypeError) as exc:
            raise ConfigError(f"malformed cell entry {raw.get('id', '?')}: {exc}") from exc
    return SequenceScript(
        dims=(dims[0], dims[1], dims[2]),
        frames=frames,
        cells=tuple(cells),
        spacing=_triple(doc.get("spacing", (0.09, 0.09, 1.0)), "spacing"),
        seed=int(doc.get("seed", 0)),
        noise=float(doc.get("noise", 0.0)),
        noise_kind=str(doc.get("noise_kind", "gaussian")),
        edge_sharpness=float(doc.get("edge_sharpness", 4.0)),
    )


def load_script(path: str | Path) -> SequenceScript:
    return parse_script(Path(path).read_text())


@dataclass
class _LiveCell:
    id: int
    birth: int
    birth_center: Triple
    radii: Triple
    peak: float
    drift: Triple
    last: int  # final frame the cell exists, inclusive
    parent: int
    divide: DivisionScript | None

    def center_at(self, frame: int) -> Triple:
        dt = frame - self.birth
        return (
            self.birth_center[0] + self.drift[0] * dt,
            self.birth_center[1] + self.drift[1] * dt,
            self.birth_center[2] + self.drift[2] * dt,
        )


def _expand_cells(script: SequenceScript) -> list[_LiveCell]:
    """Resolve divisions into concrete child cells with fresh ids."""
    live = []
    for cell in script.cells:
        if cell.divide is not None:
            last = cell.divide.frame - 1
        elif cell.vanish is not None:
            last = min(cell.vanish - 1, script.frames - 1)
        else:
            last = script.frames - 1
        live.append(
            _LiveCell(cell.id, cell.appear, cell.center, cell.radii, cell.peak,
                      cell.drift, last, 0, cell.divide)
        )
    next_id = max(c.id for c in live) + 1
    # children in (division frame, parent id) order, ids deterministic
    for parent in sorted([c for c in live if c.divide], key=lambda c: (c.divide.frame, c.id)):
        d = parent.divide
        origin = parent.center_at(d.frame)
        radii = tuple(r * d.radii_scale for r in parent.radii)
        for offset in d.offsets:
            center = tuple(o + dx for o, dx in zip(origin, offset))
            live.append(
                _LiveCell(next_id, d.frame, center, radii, parent.peak,
                          parent.drift, script.frames - 1, parent.id, None)
            )
            next_id += 1
    return live


def generate_sequence(script: SequenceScript) -> SyntheticSequence:
    """Rasterize the script into intensity + truth frames and lineage."""
    nx, ny, nz = script.dims
    sx, sy, sz = script.spacing
    xs = np.arange(nx) * sx
    ys = np.arange(ny) * sy
    zs = np.arange(nz) * sz
    cells = _expand_cells(script)

    intensities = []
    truths = []
    for frame in range(script.frames):
        labels = np.zeros((nz, ny, nx), dtype=np.int32)
        profile = np.zeros((nz, ny, nx))
        for cell in sorted(cells, key=lambda c: c.id):
            if not cell.birth <= frame <= cell.last:
                continue
            cx, cy, cz = cell.center_at(frame)
            rx, ry, rz = cell.radii
            # local bbox: the ellipsoid support, padded one voxel
            x0 = max(0, int(math.floor((cx - rx) / sx)) - 1)
            x1 = min(nx, int(math.ceil((cx + rx) / sx)) + 2)
            y0 = max(0, int(math.floor((cy - ry) / sy)) - 1)
            y1 = min(ny, int(math.ceil((cy + ry) / sy)) + 2)
            z0 = max(0, int(math.floor((cz - rz) / sz)) - 1)
            z1 = min(nz, int(math.ceil((cz + rz) / sz)) + 2)
            if x0 >= x1 or y0 >= y1 or z0 >= z1:
                continue
            fx = ((xs[x0:x1] - cx) / rx) ** 2
            fy = ((ys[y0:y1] - cy) / ry) ** 2
            fz = ((zs[z0:z1] - cz) / rz) ** 2
            rho2 = fz[:, None, None] + fy[None, :, None] + fx[None, None, :]
            inside = rho2 <= 1.0
            window = labels[z0:z1, y0:y1, x0:x1]
            if np.any(window[inside] != 0):
                other = int(window[inside][window[inside] != 0][0])
                raise ConfigError(
                    f"cells {other} and {cell.id} overlap at frame {frame}"
                )
            window[inside] = cell.id
            falloff = np.clip(script.edge_sharpness * (1.0 - rho2), 0.0, 1.0)
            patch = profile[z0:z1, y0:y1, x0:x1]
            np.maximum(patch, cell.peak * falloff, out=patch)

        if script.noise > 0:
            rng = np.random.default_rng(np.random.SeedSequence((script.seed, frame)))
            if script.noise_kind == "gaussian":
                profile = profile + script.noise * rng.standard_normal(profile.shape)
            else:
                profile = profile + rng.uniform(-script.noise, script.noise, profile.shape)
            profile = np.clip(profile, 0.0, 1.0)
        intensities.append(Volume(profile, script.spacing))
        truths.append(LabelVolume(labels, script.spacing))

    rows = [TrackRow(c.id, c.birth, c.last, c.parent) for c in cells if c.birth <= c.last]
    lineage = LineageTable(rows)
    meta = {
        "seed": script.seed,
        "noise": script.noise,
        "noise_kind": script.noise_kind,
        "edge_sharpness": script.edge_sharpness,
    }
    return SyntheticSequence(tuple(intensities), tuple(truths), lineage, meta)