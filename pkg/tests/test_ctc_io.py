import numpy as np
import pytest
import tifffile
from conftest import ANISO, ISO

from segtrack3d.ctc import (
    SequenceLayout,
    detect_layout,
    read_label_sequence,
    read_label_volume,
    read_lineage,
    read_sequence,
    read_volume,
    write_label_volume,
    write_lineage,
    write_volume,
)
from segtrack3d.errors import LayoutError
from segtrack3d.lineage import LineageTable, TrackRow
from segtrack3d.volume import LabelVolume, Volume


class TestVolumeRoundTrip:
    def test_probability_within_quantization(self, tmp_path, rng):
        path = tmp_path / "v.tif"
        vol = Volume(rng.random((3, 5, 7)), ANISO)
        write_volume(path, vol)
        back = read_volume(path, ANISO)
        assert back.dims == vol.dims
        assert back.spacing == ANISO
        assert np.abs(back.data - vol.data).max() <= 1.0 / 65535 + 1e-12

    def test_uint8_rescaled(self, tmp_path):
        path = tmp_path / "v8.tif"
        tifffile.imwrite(path, np.array([[[0, 51, 255]]], dtype=np.uint8))
        back = read_volume(path, ISO)
        assert back.data.ravel().tolist() == pytest.approx([0.0, 0.2, 1.0])

    def test_float_passthrough(self, tmp_path):
        path = tmp_path / "vf.tif"
        tifffile.imwrite(path, np.full((2, 2, 2), 0.25, dtype=np.float32))
        back = read_volume(path, ISO)
        assert np.allclose(back.data, 0.25)

    def test_signed_int_rejected(self, tmp_path):
        path = tmp_path / "bad.tif"
        tifffile.imwrite(path, np.zeros((2, 2, 2), dtype=np.int16))
        with pytest.raises(LayoutError, match="unsupported sample type"):
            read_volume(path, ISO)

    def test_single_page_becomes_one_slice(self, tmp_path):
        path = tmp_path / "flat.tif"
        tifffile.imwrite(path, np.zeros((4, 6), dtype=np.uint8))
        back = read_volume(path, ISO)
        assert back.data.shape == (1, 4, 6)

    def test_missing_file_named(self, tmp_path):
        with pytest.raises(LayoutError, match="nope.tif"):
            read_volume(tmp_path / "nope.tif", ISO)

    def test_write_is_deterministic(self, tmp_path, rng):
        vol = Volume(rng.random((3, 4, 4)), ISO)
        a, b = tmp_path / "a.tif", tmp_path / "b.tif"
        write_volume(a, vol)
        write_volume(b, vol)
        assert a.read_bytes() == b.read_bytes()


class TestLabelRoundTrip:
    def test_verbatim(self, tmp_path):
        data = np.zeros((5, 5, 5), dtype=np.int32)
        data[0:2, 0:3, 0:3] = 7
        data[3:5, 1:4, 2:5] = 42
        labels = LabelVolume(data, ISO)
        path = tmp_path / "m.tif"
        write_label_volume(path, labels)
        back = read_label_volume(path, ISO)
        assert np.array_equal(back.data, labels.data)

    def test_float_stack_rejected(self, tmp_path):
        path = tmp_path / "f.tif"
        tifffile.imwrite(path, np.zeros((2, 2, 2), dtype=np.float32))
        with pytest.raises(LayoutError, match="must be integer"):
            read_label_volume(path, ISO)

    def test_label_overflow_rejected(self, tmp_path):
        big = LabelVolume(np.full((1, 1, 1), 70000, dtype=np.int32), ISO)
        with pytest.raises(LayoutError, match="16-bit"):
            write_label_volume(tmp_path / "big.tif", big)


class TestLayout:
    def write_frames(self, root, pattern, indices):
        for i in indices:
            tifffile.imwrite(root / (pattern % i), np.zeros((2, 3, 3), dtype=np.uint16))

    def test_contiguous_indices(self, tmp_path):
        layout = SequenceLayout(tmp_path, "mask%03d.tif")
        self.write_frames(tmp_path, "mask%03d.tif", [0, 1, 2])
        assert layout.frame_indices() == [0, 1, 2]

    def test_gap_reported(self, tmp_path):
        layout = SequenceLayout(tmp_path, "mask%03d.tif")
        self.write_frames(tmp_path, "mask%03d.tif", [0, 1, 3])
        with pytest.raises(LayoutError, match=r"missing \[2\]"):
            layout.frame_indices()

    def test_must_start_at_zero(self, tmp_path):
        layout = SequenceLayout(tmp_path, "t%03d.tif")
        self.write_frames(tmp_path, "t%03d.tif", [1, 2])
        with pytest.raises(LayoutError, match="contiguous from 0"):
            layout.frame_indices()

    def test_empty_directory(self, tmp_path):
        with pytest.raises(LayoutError, match="no frames"):
            SequenceLayout(tmp_path, "t%03d.tif").frame_indices()

    def test_missing_directory(self, tmp_path):
        with pytest.raises(LayoutError, match="does not exist"):
            SequenceLayout(tmp_path / "gone", "t%03d.tif").frame_indices()

    def test_detect_prefers_result_masks(self, tmp_path):
        self.write_frames(tmp_path, "mask%03d.tif", [0])
        self.write_frames(tmp_path, "t%03d.tif", [0])
        layout = detect_layout(tmp_path)
        assert layout.frame_pattern == "mask%03d.tif"
        assert layout.lineage_name == "res_track.txt"

    def test_detect_truth(self, tmp_path):
        self.write_frames(tmp_path, "man_track%03d.tif", [0])
        layout = detect_layout(tmp_path)
        assert layout.frame_pattern == "man_track%03d.tif"
        assert layout.lineage_name == "man_track.txt"

    def test_detect_nothing(self, tmp_path):
        with pytest.raises(LayoutError, match="no recognized frame files"):
            detect_layout(tmp_path)

    def test_sequence_dims_must_match(self, tmp_path):
        tifffile.imwrite(tmp_path / "t000.tif", np.zeros((2, 3, 3), dtype=np.uint16))
        tifffile.imwrite(tmp_path / "t001.tif", np.zeros((2, 4, 3), dtype=np.uint16))
        with pytest.raises(LayoutError, match="differ from first frame"):
            read_sequence(SequenceLayout(tmp_path, "t%03d.tif"), ISO)

    def test_read_label_sequence(self, tmp_path):
        self.write_frames(tmp_path, "mask%03d.tif", [0, 1])
        frames = read_label_sequence(SequenceLayout(tmp_path, "mask%03d.tif"), ANISO)
        assert len(frames) == 2
        assert all(isinstance(f, LabelVolume) for f in frames)


class TestLineageFile:
    def test_format_with_divisions(self, tmp_path):
        table = LineageTable(
            (TrackRow(1, 0, 2, 0), TrackRow(2, 3, 5, 1), TrackRow(3, 3, 5, 1))
        )
        path = tmp_path / "res_track.txt"
        write_lineage(table, path)
        assert path.read_text() == "1 0 2 0\n2 3 5 1\n3 3 5 1\n"

    def test_round_trip(self, tmp_path):
        table = LineageTable(
            (TrackRow(1, 0, 4, 0), TrackRow(2, 2, 4, 0), TrackRow(5, 5, 6, 1))
        )
        path = tmp_path / "res_track.txt"
        write_lineage(table, path)
        assert read_lineage(path).tracks == table.tracks

    def test_blank_lines_skipped(self, tmp_path):
        path = tmp_path / "t.txt"
        path.write_text("1 0 2 0\n\n2 3 4 1\n")
        assert len(read_lineage(path).tracks) == 2

    def test_bad_column_count(self, tmp_path):
        path = tmp_path / "t.txt"
        path.write_text("1 0 2\n")
        with pytest.raises(LayoutError, match="expected 4 columns"):
            read_lineage(path)

    def test_invalid_row_reported_with_line(self, tmp_path):
        path = tmp_path / "t.txt"
        path.write_text("1 0 2 0\n2 5 3 0\n")
        with pytest.raises(LayoutError, match="t.txt:2"):
            read_lineage(path)

    def test_missing_file(self, tmp_path):
        with pytest.raises(LayoutError, match="not found"):
            read_lineage(tmp_path / "absent.txt")
