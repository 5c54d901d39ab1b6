import numpy as np
import pytest

from segtrack3d.errors import ConfigError
from segtrack3d.metrics import det_score, seg_score, tra_score
from segtrack3d.synth import (
    CellScript,
    DivisionScript,
    SequenceScript,
    generate_sequence,
    parse_script,
)


def one_cell_script(frames=3, noise=0.0, **cell_kw):
    cell = CellScript(id=1, center=(2.0, 2.0, 3.0), radii=(1.2, 1.2, 2.0), **cell_kw)
    return SequenceScript(
        dims=(48, 48, 7), frames=frames, cells=(cell,),
        spacing=(0.09, 0.09, 1.0), seed=5, noise=noise,
    )


class TestScriptValidation:
    def test_overlap_rejected(self):
        cells = (
            CellScript(id=1, center=(2.0, 2.0, 3.0), radii=(1.0, 1.0, 2.0)),
            CellScript(id=2, center=(2.5, 2.0, 3.0), radii=(1.0, 1.0, 2.0)),
        )
        script = SequenceScript(dims=(64, 64, 7), frames=2, cells=cells)
        with pytest.raises(ConfigError, match="overlap"):
            generate_sequence(script)

    def test_duplicate_ids(self):
        cells = (
            CellScript(id=1, center=(1.0, 1.0, 1.0), radii=(0.5, 0.5, 0.5)),
            CellScript(id=1, center=(3.0, 3.0, 3.0), radii=(0.5, 0.5, 0.5)),
        )
        with pytest.raises(ConfigError):
            SequenceScript(dims=(64, 64, 7), frames=2, cells=cells)

    def test_divide_and_vanish_conflict(self):
        with pytest.raises(ConfigError):
            CellScript(
                id=1, center=(1, 1, 1), radii=(1, 1, 1),
                divide=DivisionScript(1, ((0, 0, 0), (1, 0, 0))), vanish=2,
            )

    def test_division_beyond_sequence(self):
        cell = CellScript(
            id=1, center=(2, 2, 3), radii=(1, 1, 1),
            divide=DivisionScript(5, ((-1, 0, 0), (1, 0, 0))),
        )
        with pytest.raises(ConfigError):
            SequenceScript(dims=(48, 48, 7), frames=3, cells=(cell,))


class TestGeneration:
    def test_static_cell_lineage(self):
        seq = generate_sequence(one_cell_script(frames=3))
        assert [(r.id, r.begin, r.end, r.parent) for r in seq.lineage.tracks] == [(1, 0, 2, 0)]
        assert len(seq.intensity) == 3
        for frame in seq.truth:
            assert set(frame.labels().tolist()) == {1}

    def test_membership_matches_ellipsoid(self):
        seq = generate_sequence(one_cell_script(frames=1))
        labels = seq.truth[0]
        coords = np.argwhere(labels.data == 1)
        sx, sy, sz = labels.spacing
        for z, y, x in coords[:: max(1, len(coords) // 50)]:
            rho2 = (
                ((x * sx - 2.0) / 1.2) ** 2
                + ((y * sy - 2.0) / 1.2) ** 2
                + ((z * sz - 3.0) / 2.0) ** 2
            )
            assert rho2 <= 1.0 + 1e-12

    def test_scripted_division(self):
        cell = CellScript(
            id=1, center=(2.0, 2.0, 3.0), radii=(1.0, 1.0, 1.5),
            divide=DivisionScript(2, ((-1.1, 0, 0), (1.1, 0, 0)), radii_scale=0.6),
        )
        script = SequenceScript(dims=(64, 48, 7), frames=4, cells=(cell,), seed=1)
        seq = generate_sequence(script)
        rows = {r.id: r for r in seq.lineage.tracks}
        assert rows[1].end == 1
        assert rows[2].parent == 1 and rows[2].begin == 2 and rows[2].end == 3
        assert rows[3].parent == 1 and rows[3].begin == 2
        assert set(seq.truth[2].labels().tolist()) == {2, 3}

    def test_vanish_and_appear(self):
        cells = (
            CellScript(id=1, center=(1.5, 1.5, 3.0), radii=(0.8, 0.8, 1.5), vanish=2),
            CellScript(id=2, center=(4.0, 4.0, 3.0), radii=(0.8, 0.8, 1.5), appear=1),
        )
        script = SequenceScript(dims=(64, 64, 7), frames=3, cells=cells)
        seq = generate_sequence(script)
        assert set(seq.truth[0].labels().tolist()) == {1}
        assert set(seq.truth[1].labels().tolist()) == {1, 2}
        assert set(seq.truth[2].labels().tolist()) == {2}
        rows = {r.id: r for r in seq.lineage.tracks}
        assert rows[1].end == 1
        assert rows[2].begin == 1

    def test_deterministic_with_noise(self):
        a = generate_sequence(one_cell_script(noise=0.08))
        b = generate_sequence(one_cell_script(noise=0.08))
        for fa, fb in zip(a.intensity, b.intensity):
            assert np.array_equal(fa.data, fb.data)

    def test_noise_changes_with_seed(self):
        base = one_cell_script(noise=0.08)
        other = SequenceScript(
            dims=base.dims, frames=base.frames, cells=base.cells,
            spacing=base.spacing, seed=99, noise=0.08,
        )
        a = generate_sequence(base)
        b = generate_sequence(other)
        assert not np.array_equal(a.intensity[0].data, b.intensity[0].data)

    def test_intensity_in_unit_range(self):
        seq = generate_sequence(one_cell_script(noise=0.3))
        for frame in seq.intensity:
            assert frame.data.min() >= 0.0 and frame.data.max() <= 1.0

    def test_drift_moves_cell(self):
        seq = generate_sequence(one_cell_script(frames=3, drift=(0.45, 0.0, 0.0)))
        c0 = np.argwhere(seq.truth[0].data == 1)[:, 2].mean()
        c2 = np.argwhere(seq.truth[2].data == 1)[:, 2].mean()
        assert c2 > c0 + 5  # 0.9 microns = 10 voxels at 0.09 spacing

    def test_truth_scores_itself_perfectly(self):
        cell = CellScript(
            id=1, center=(2.0, 2.0, 3.0), radii=(1.0, 1.0, 1.5),
            divide=DivisionScript(2, ((-1.1, 0, 0), (1.1, 0, 0)), radii_scale=0.6),
        )
        script = SequenceScript(dims=(64, 48, 7), frames=4, cells=(cell,))
        seq = generate_sequence(script)
        truth = list(seq.truth)
        assert seg_score(truth, truth) == 1.0
        assert det_score(truth, truth) == 1.0
        assert tra_score(truth, seq.lineage, truth, seq.lineage) == 1.0


class TestParseScript:
    GOOD = """
    {
      "dims": [32, 32, 5],
      "frames": 2,
      "seed": 3,
      "noise": 0.05,
      "cells": [
        {"id": 1, "center": [1.0, 1.0, 2.0], "radii": [0.6, 0.6, 1.0],
         "divide": {"frame": 1, "offsets": [[-0.5, 0, 0], [0.5, 0, 0]]}}
      ]
    }
    """

    def test_round_trip_fields(self):
        script = parse_script(self.GOOD)
        assert script.dims == (32, 32, 5)
        assert script.cells[0].divide.frame == 1
        assert script.cells[0].divide.radii_scale == 0.7
        seq = generate_sequence(script)
        assert len(seq.truth) == 2

    def test_bad_json(self):
        with pytest.raises(ConfigError):
            parse_script("{not json")

    def test_unknown_keys(self):
        with pytest.raises(ConfigError, match="unknown"):
            parse_script('{"dims": [4, 4, 4], "frames": 1, "cells": [], "wat": 1}')

    def test_missing_required(self):
        with pytest.raises(ConfigError, match="missing"):
            parse_script('{"frames": 1, "cells": []}')

    def test_malformed_cell(self):
        with pytest.raises(ConfigError):
            parse_script('{"dims": [4,4,4], "frames": 1, "cells": [{"id": 1}]}')
