"""Acceptance suite: one test per shipped guarantee, each self-contained.

Every test seeds its own data and, where a wall-clock budget is part of
the guarantee, asserts it so a performance regression fails loudly.
"""

from __future__ import annotations

import json
import time

import numpy as np
import pytest
from scipy import ndimage

from segtrack3d.adjacency import build_graph, min_dilation_distance
from segtrack3d.cli import main
from segtrack3d.correction import cluster_correlation, correct_boundaries
from segtrack3d.detection import SeedSet
from segtrack3d.lineage import LineageTable, TrackRow
from segtrack3d.metrics import det_score, op_scores, seg_score, tra_score
from segtrack3d.slic import SlicConfig, slic
from segtrack3d.synth import (
    CellScript,
    DivisionScript,
    SequenceScript,
    generate_sequence,
)
from segtrack3d.tracking import TrackFeature, TrackerConfig, link_frames, track_sequence
from segtrack3d.volume import LabelVolume, Volume, connected_components
from segtrack3d.watershed import WatershedConfig, watershed

ISO = (1.0, 1.0, 1.0)


def packed_ellipsoids(seed, dims, n_range, radii_range):
    """Single-frame scene of non-overlapping ellipsoids, rejection-placed."""
    rng = np.random.default_rng(seed)
    n_cells = int(rng.integers(*n_range))
    cells = []
    placed = []
    attempts = 0
    while len(cells) < n_cells and attempts < 4000:
        attempts += 1
        radii = rng.uniform(*radii_range, size=3)
        rmax = float(radii.max())
        center = np.array([
            rng.uniform(rmax + 1.5, dims[0] - rmax - 1.5),
            rng.uniform(rmax + 1.5, dims[1] - rmax - 1.5),
            rng.uniform(rmax + 1.5, dims[2] - rmax - 1.5),
        ])
        if not all(np.linalg.norm(center - c) >= rmax + r + 1.0 for c, r in placed):
            continue
        placed.append((center, rmax))
        cells.append(
            CellScript(
                id=len(cells) + 1,
                center=tuple(center),
                radii=tuple(radii),
                peak=float(rng.uniform(0.7, 0.95)),
            )
        )
    return SequenceScript(
        dims=dims, frames=1, cells=tuple(cells), spacing=ISO,
        seed=seed, noise=0.1, noise_kind="gaussian",
    )


def degraded_scene(seed):
    """Truth labels, a blurred (deliberately sloppy) probability map, and
    seeds at the scripted centers, for the watershed-quality experiments."""
    script = packed_ellipsoids(seed, dims=(56, 56, 24), n_range=(5, 21),
                               radii_range=(2.5, 4.5))
    seq = generate_sequence(script)
    truth = seq.truth[0]
    blurred = ndimage.gaussian_filter(
        (truth.data > 0).astype(np.float64), sigma=(1.0, 2.0, 2.0)
    )
    prob = Volume(np.clip(blurred, 0.0, 1.0), ISO)
    coords = np.array(
        [[round(c.center[0]), round(c.center[1]), round(c.center[2])]
         for c in script.cells],
        dtype=np.int64,
    )
    seeds = SeedSet(coords, np.ones(len(coords)))
    return seq.intensity[0], truth, prob, seeds


def lineage_scene(seed):
    """Five-frame script with exactly one division and one disappearance.

    Cells sit on a sparse grid and get one volume tier each, so the
    feature-based matcher cannot confuse any two of them; the division
    children land far enough apart to stay adjacency-isolated.
    """
    rng = np.random.default_rng(1000 + seed)
    n_cells = int(rng.integers(3, 6))
    slots = [(14.0 + 22.0 * (i % 3), 14.0 + 22.0 * (i // 3)) for i in range(6)]
    rng.shuffle(slots)
    divide_cell = int(rng.integers(1, n_cells + 1))
    vanish_cell = divide_cell % n_cells + 1
    divide_frame = int(rng.integers(2, 4))
    vanish_frame = 5 - divide_frame
    cells = []
    for cid in range(1, n_cells + 1):
        x, y = slots[cid - 1]
        base = 2.4 + 0.45 * (cid - 1)
        radii = tuple(base * rng.uniform(0.95, 1.05, size=3))
        drift = tuple(rng.uniform(-0.25, 0.25, size=3) * np.array([1, 1, 0.3]))
        kw = {}
        if cid == divide_cell:
            kw["divide"] = DivisionScript(
                frame=divide_frame,
                offsets=((-6.5, 0.0, 0.0), (6.5, 0.0, 0.0)),
                radii_scale=0.6,
            )
        elif cid == vanish_cell:
            kw["vanish"] = vanish_frame
        cells.append(
            CellScript(id=cid, center=(x, y, 10.0), radii=radii,
                       peak=0.9, drift=drift, **kw)
        )
    return SequenceScript(dims=(72, 48, 20), frames=5, cells=tuple(cells),
                          spacing=ISO, seed=seed)


def test_01_overall_scores_combine_their_inputs_by_plain_average():
    op_csb, op_ctb = op_scores(0.927, 0.705, 0.895)
    assert op_csb == pytest.approx(0.816, abs=5e-4)
    assert op_ctb == pytest.approx(0.800, abs=5e-4)


def test_02_overlap_table_and_reassignment_match_brute_force():
    rng = np.random.default_rng(42)
    t0 = time.perf_counter()
    for _ in range(100):
        sv = LabelVolume(rng.integers(0, 5, size=(4, 4, 4)), ISO)
        ws = LabelVolume(rng.integers(0, 5, size=(4, 4, 4)), ISO)

        tally: dict[tuple[int, int], int] = {}
        for i, j in zip(sv.data.ravel().tolist(), ws.data.ravel().tolist()):
            if i > 0:
                tally[(i, j)] = tally.get((i, j), 0) + 1
        table = cluster_correlation(sv, ws)
        assert table.entries == tally

        # per-row argmax; ties resolve to background first, then the
        # lowest region label
        expected = np.zeros_like(sv.data)
        for i in {i for i, _ in tally}:
            row = {j: c for (si, j), c in tally.items() if si == i}
            top = max(row.values())
            best = [j for j, c in row.items() if c == top]
            expected[sv.data == i] = 0 if 0 in best else min(best)
        out = correct_boundaries(sv, ws, table)
        np.testing.assert_array_equal(out.data, expected)
    assert time.perf_counter() - t0 < 5.0


def test_03_reassignment_over_identical_partitions_changes_nothing():
    rng = np.random.default_rng(7)
    for _ in range(20):
        ws = LabelVolume(rng.integers(0, 6, size=(5, 6, 4)), ISO)
        out = correct_boundaries(ws, ws, cluster_correlation(ws, ws))
        np.testing.assert_array_equal(out.data, ws.data)


def test_04_supervoxel_reassignment_recovers_degraded_boundaries():
    t0 = time.perf_counter()
    wins = 0
    deltas = []
    for seed in range(10):
        intensity, truth, prob, seeds = degraded_scene(seed)
        ws = watershed(prob, seeds, WatershedConfig(mask_threshold=0.4))
        sv = slic(intensity, SlicConfig(k=1500, compactness=0.2))
        corrected = correct_boundaries(sv, ws, cluster_correlation(sv, ws))
        before = seg_score([ws], [truth])
        after = seg_score([corrected], [truth])
        wins += after >= before
        deltas.append(after - before)
    assert wins >= 9
    assert float(np.mean(deltas)) > 0.0
    assert time.perf_counter() - t0 < 120.0


def test_05_flooded_regions_keep_foreground_seeds_and_connectivity():
    cfg = WatershedConfig(mask_threshold=0.4)
    for seed in range(5):
        _, _, prob, seeds = degraded_scene(seed)
        labels = watershed(prob, seeds, cfg)
        fg = prob.data >= cfg.mask_threshold
        voxel_of = [tuple(c[::-1]) for c in seeds.coords]  # (ix,iy,iz) -> index
        kept = [i for i in range(len(seeds)) if fg[voxel_of[i]]]

        # labeled voxels are exactly the foreground components that hold
        # at least one surviving seed
        comp, _ = connected_components(LabelVolume(fg.astype(np.int32), ISO))
        seeded = sorted({int(comp.data[voxel_of[i]]) for i in kept})
        np.testing.assert_array_equal(labels.data > 0, np.isin(comp.data, seeded) & fg)

        # one region per seed, numbered by seed order, each region connected
        seed_labels = [int(labels.data[voxel_of[i]]) for i in kept]
        assert seed_labels == list(range(1, len(kept) + 1))
        assert sorted(int(l) for l in labels.labels()) == seed_labels
        for r in seed_labels:
            region = LabelVolume((labels.data == r).astype(np.int32), ISO)
            _, count = connected_components(region)
            assert count == 1


def test_06_supervoxels_partition_the_volume_and_follow_a_step_edge():
    rng = np.random.default_rng(3)
    for _ in range(3):
        vol = Volume(rng.random((10, 12, 14)), ISO)
        labels = slic(vol, SlicConfig(k=40))
        assert labels.data.min() >= 1  # every voxel covered
        ids = labels.labels()
        assert np.array_equal(ids, np.arange(1, ids.size + 1))
        for r in ids:
            region = LabelVolume((labels.data == int(r)).astype(np.int32), ISO)
            _, count = connected_components(region)
            assert count == 1

    step = np.full((6, 6, 8), 0.2)
    step[:, :, 4:] = 0.8
    labels = slic(Volume(step, ISO), SlicConfig(k=2, compactness=0.01))
    left, right = labels.data[:, :, :4], labels.data[:, :, 4:]
    assert np.all(left == left.flat[0])  # zero misplaced voxels
    assert np.all(right == right.flat[0])
    assert left.flat[0] != right.flat[0]


def test_07_batch_adjacency_equals_pairwise_dilation_distances():
    for seed in range(10):
        script = packed_ellipsoids(500 + seed, dims=(40, 40, 16),
                                   n_range=(4, 9), radii_range=(2.0, 3.5))
        labels = generate_sequence(script).truth[0]
        graph = build_graph(labels, max_radius=4)
        ids = [int(l) for l in labels.labels()]
        for ai in range(len(ids)):
            for bi in range(ai + 1, len(ids)):
                i, j = ids[ai], ids[bi]
                assert graph.weight(i, j) == min_dilation_distance(labels, i, j, 4)


def test_08_scripted_lineages_are_recovered_exactly_from_truth_masks():
    cfg = TrackerConfig(threshold=0.3, max_radius=3, division_radius=4)
    for seed in range(10):
        script = lineage_scene(seed)
        assert any(c.divide is not None for c in script.cells)
        assert any(c.vanish is not None for c in script.cells)
        seq = generate_sequence(script)
        result = track_sequence(list(seq.truth), cfg)
        assert result.table.tracks == seq.lineage.tracks
        tra = tra_score(list(seq.truth), result.table, list(seq.truth), seq.lineage)
        assert tra == 1.0


def test_09_linking_cost_grows_no_faster_than_quadratic_with_log_factor():
    rng = np.random.default_rng(11)

    def feature_row(label):
        deg = int(rng.integers(0, 5))
        wdeg = float(rng.uniform(1.0, 8.0)) if deg else 0.0
        return TrackFeature(label, float(rng.uniform(50.0, 500.0)), deg, wdeg)

    t0 = time.perf_counter()
    sizes = [25, 50, 100]
    best_times = []
    for m in sizes:
        best = float("inf")
        for _ in range(5):
            feats_a = [feature_row(l + 1) for l in range(m)]
            feats_b = [feature_row(l + 1) for l in range(m)]
            start = time.perf_counter()
            for _ in range(20):
                link_frames(feats_a, feats_b, threshold=5.0)
            best = min(best, (time.perf_counter() - start) / 20)
        best_times.append(best)
    exponent = float(np.polyfit(np.log(sizes), np.log(best_times), 1)[0])
    assert exponent <= 2.5
    assert time.perf_counter() - t0 < 300.0


def test_10_hand_computed_detection_and_tracking_scores_match():
    # three bars, result misses the third: node cost 10 against a
    # build-everything cost of 3 * 10
    bars = np.zeros((1, 1, 12), dtype=np.int32)
    bars[0, 0, 0:3] = 1
    bars[0, 0, 4:7] = 2
    bars[0, 0, 8:11] = 3
    truth = LabelVolume(bars, ISO)
    result = LabelVolume(np.where(bars == 3, 0, bars), ISO)
    assert det_score([result], [truth]) == pytest.approx(1.0 - 10.0 / 30.0, abs=1e-9)

    # one nucleus over two frames; the result breaks the temporal link,
    # so one truth edge (1.5) is missing out of 2 * 10 + 1.5 total
    blob = np.zeros((1, 1, 5), dtype=np.int32)
    blob[0, 0, 1:4] = 1
    frame = LabelVolume(blob, ISO)
    truth_lineage = LineageTable((TrackRow(1, 0, 1, 0),))
    split = [frame, frame.like(np.where(blob == 1, 2, 0))]
    split_lineage = LineageTable((TrackRow(1, 0, 0, 0), TrackRow(2, 1, 1, 0)))
    tra = tra_score(split, split_lineage, [frame, frame], truth_lineage)
    assert tra == pytest.approx(1.0 - 1.5 / 21.5, abs=1e-9)


def test_11_repeated_pipeline_runs_are_byte_identical(tmp_path):
    script = {
        "dims": [40, 40, 8],
        "frames": 3,
        "spacing": [0.09, 0.09, 1.0],
        "seed": 5,
        "noise": 0.05,
        "cells": [
            {"id": 1, "center": [1.2, 1.2, 3.0], "radii": [0.5, 0.5, 1.5],
             "peak": 0.9, "drift": [0.3, 0.0, 0.0]},
            {"id": 2, "center": [2.6, 2.6, 5.0], "radii": [0.5, 0.5, 1.5],
             "peak": 0.9, "drift": [0.0, 0.0, 0.0]},
        ],
    }
    script_path = tmp_path / "script.json"
    script_path.write_text(json.dumps(script))
    seq_dir = tmp_path / "seq"
    assert main(["synth", "--input", str(script_path), "--output", str(seq_dir)]) == 0
    cfg_path = tmp_path / "pipeline.txt"
    cfg_path.write_text("detection.source=file\nwatershed.threshold=0.4\n")

    runs = []
    for tag in ("a", "b"):
        seg_dir = tmp_path / f"seg_{tag}"
        trk_dir = tmp_path / f"trk_{tag}"
        assert main(["segment", "--config", str(cfg_path),
                     "--input", str(seq_dir), "--output", str(seg_dir)]) == 0
        assert main(["track", "--input", str(seg_dir),
                     "--output", str(trk_dir)]) == 0
        runs.append((seg_dir, trk_dir))

    for dir_a, dir_b in zip(*runs):
        names_a = sorted(p.name for p in dir_a.iterdir())
        names_b = sorted(p.name for p in dir_b.iterdir())
        assert names_a == names_b and names_a
        for name in names_a:
            assert (dir_a / name).read_bytes() == (dir_b / name).read_bytes()
