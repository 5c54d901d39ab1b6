"""Pipeline configuration: a flat key=value file drives every stage.

Keys use dotted namespaces (``slic.k``, ``tracking.threshold``) mapped
onto the fields of :class:`PipelineConfig`. ``resolved_text`` emits the
full effective configuration in a canonical order so a run can archive
exactly what it used; parsing that text back yields an equal config.
"""

from __future__ import annotations

from dataclasses import dataclass, fields, replace
from pathlib import Path

from .errors import ConfigError
from .metrics import AogmCosts
from .slic import SlicConfig
from .tracking import TrackerConfig
from .volume import Connectivity
from .watershed import WatershedConfig

_TRUE = {"true", "yes", "on", "1"}
_FALSE = {"false", "no", "off", "0"}


@dataclass(frozen=True)
class PipelineConfig:
    spacing: tuple[float, float, float] = (0.09, 0.09, 1.0)
    detection_source: str = "blob"  # "blob" computes a response map; "file" trusts the input
    detection_scales: tuple[float, ...] = (1.5, 2.5, 4.0)
    detection_min_score: float = 0.3
    detection_min_separation: float = 2.0
    watershed_connectivity: int = 6
    watershed_levels: int = 256
    watershed_threshold: float = 0.5
    slic_k: int = 500
    slic_compactness: float = 0.2
    slic_max_iters: int = 10
    correction_enabled: bool = True
    tracking_threshold: float = 1.0
    tracking_max_radius: int = 10
    tracking_division_radius: int = 0  # 0 falls back to tracking.max_radius
    aogm_ns: float = 5.0
    aogm_fn: float = 10.0
    aogm_fp: float = 1.0
    aogm_ed: float = 1.0
    aogm_ea: float = 1.5
    aogm_ec: float = 1.0

    def __post_init__(self) -> None:
        if len(self.spacing) != 3 or any(s <= 0 for s in self.spacing):
            raise ConfigError(f"spacing must be three positive floats, got {self.spacing!r}")
        if self.detection_source not in ("blob", "file"):
            raise ConfigError(
                f"detection.source must be 'blob' or 'file', got {self.detection_source!r}"
            )
        if not self.detection_scales or any(s <= 0 for s in self.detection_scales):
            raise ConfigError(f"detection.scales must be positive, got {self.detection_scales!r}")
        try:
            Connectivity.from_int(self.watershed_connectivity)
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc
        for name, value in (
            ("slic.k", self.slic_k),
            ("slic.max_iters", self.slic_max_iters),
            ("tracking.max_radius", self.tracking_max_radius),
        ):
            if value < 1:
                raise ConfigError(f"{name} must be >= 1, got {value}")
        if self.tracking_division_radius < 0:
            raise ConfigError(
                f"tracking.division_radius must be >= 0, got {self.tracking_division_radius}"
            )
        # range checks on the rest are delegated to the stage config types
        self.watershed_config()
        self.slic_config()
        self.tracker_config()
        self.aogm_costs()

    def watershed_config(self) -> WatershedConfig:
        try:
            return WatershedConfig(
                conn=Connectivity.from_int(self.watershed_connectivity),
                level_quantization=self.watershed_levels,
                mask_threshold=self.watershed_threshold,
            )
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc

    def slic_config(self, k: int | None = None) -> SlicConfig:
        try:
            return SlicConfig(
                k=self.slic_k if k is None else k,
                compactness=self.slic_compactness,
                max_iters=self.slic_max_iters,
            )
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc

    def tracker_config(self) -> TrackerConfig:
        try:
            return TrackerConfig(
                threshold=self.tracking_threshold,
                max_radius=self.tracking_max_radius,
                division_radius=self.tracking_division_radius or None,
            )
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc

    def aogm_costs(self) -> AogmCosts:
        try:
            return AogmCosts(
                ns=self.aogm_ns,
                fn=self.aogm_fn,
                fp=self.aogm_fp,
                ed=self.aogm_ed,
                ea=self.aogm_ea,
                ec=self.aogm_ec,
            )
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc


def _key(field_name: str) -> str:
    return field_name.replace("_", ".", 1)


def _field_name(key: str) -> str:
    return key.replace(".", "_", 1)


def _parse_value(raw: str, kind, key: str):
    raw = raw.strip()
    try:
        if kind is bool:
            lowered = raw.lower()
            if lowered in _TRUE:
                return True
            if lowered in _FALSE:
                return False
            raise ValueError(f"not a boolean: {raw!r}")
        if kind is int:
            return int(raw)
        if kind is float:
            return float(raw)
        if kind is str:
            return raw
        # remaining config fields are float tuples
        parts = [p for chunk in raw.split(",") for p in chunk.split()] if raw else []
        return tuple(float(p) for p in parts)
    except ValueError as exc:
        raise ConfigError(f"bad value for {key}: {exc}") from exc


def parse_config_text(text: str) -> dict[str, str]:
    """Raw key -> value strings; '#' lines are comments, later keys may not repeat."""
    out: dict[str, str] = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        if "=" not in stripped:
            raise ConfigError(f"line {lineno}: expected key = value, got {line!r}")
        key, _, value = stripped.partition("=")
        key = key.strip()
        if key in out:
            raise ConfigError(f"line {lineno}: duplicate key {key!r}")
        out[key] = value.strip()
    return out


def config_from_mapping(mapping: dict[str, str]) -> PipelineConfig:
    by_name = {f.name: f for f in fields(PipelineConfig)}
    updates = {}
    for key, raw in mapping.items():
        name = _field_name(key)
        if name not in by_name:
            raise ConfigError(f"unknown config key {key!r}")
        default = by_name[name].default
        kind = type(default) if default is not None else str
        if name in ("spacing", "detection_scales"):
            kind = tuple
        updates[name] = _parse_value(raw, kind, key)
    return replace(PipelineConfig(), **updates)


def load_config(path: str | Path) -> PipelineConfig:
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"config file not found: {path}")
    return config_from_mapping(parse_config_text(path.read_text()))


def _format_value(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, tuple):
        return ",".join(repr(float(v)) for v in value)
    if isinstance(value, float):
        return repr(value)
    return str(value)


def resolved_text(cfg: PipelineConfig) -> str:
    """Every tunable as one canonical key=value line, in field order."""
    lines = [f"{_key(f.name)} = {_format_value(getattr(cfg, f.name))}" for f in fields(cfg)]
    return "".join(line + "\n" for line in lines)
