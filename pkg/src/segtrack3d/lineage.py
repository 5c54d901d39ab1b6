"""Track lineage table in the four-column text convention: id begin end parent."""

from __future__ import annotations

from dataclasses import dataclass


@dataclass(frozen=True)
class TrackRow:
    id: int
    begin: int
    end: int
    parent: int  # 0 = no parent

    def __post_init__(self) -> None:
        if self.id <= 0:
            raise ValueError(f"track id must be positive, got {self.id}")
        if self.begin > self.end:
            raise ValueError(f"track {self.id}: begin {self.begin} > end {self.end}")
        if self.parent < 0:
            raise ValueError(f"track {self.id}: parent must be >= 0")


@dataclass(frozen=True)
class LineageTable:
    tracks: tuple[TrackRow, ...]

    def __post_init__(self) -> None:
        rows = tuple(sorted(self.tracks, key=lambda r: r.id))
        object.__setattr__(self, "tracks", rows)
        by_id = {r.id: r for r in rows}
        if len(by_id) != len(rows):
            raise ValueError("track ids must be unique")
        for r in rows:
            if r.parent:
                parent = by_id.get(r.parent)
                if parent is None:
                    raise ValueError(f"track {r.id}: unknown parent {r.parent}")
                if parent.end >= r.begin:
                    raise ValueError(
                        f"track {r.id} begins at {r.begin} but parent {r.parent} "
                        f"ends at {parent.end}"
                    )

    def __len__(self) -> int:
        return len(self.tracks)

    def by_id(self) -> dict[int, TrackRow]:
        return {r.id: r for r in self.tracks}

    def active_at(self, frame: int) -> list[TrackRow]:
        return [r for r in self.tracks if r.begin <= frame <= r.end]

    def frame_count(self) -> int:
        return max((r.end for r in self.tracks), default=-1) + 1
