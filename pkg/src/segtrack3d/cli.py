"""Command line entry points: segment, track, evaluate, synth.

Exit codes: 0 on success, 2 for configuration problems, 3 for file
layout problems, 4 for algorithmic failures. Every run that writes
outputs also writes the resolved configuration next to them.
"""

from __future__ import annotations

import argparse
import dataclasses
import logging
import sys
from pathlib import Path

from .config import PipelineConfig, load_config, resolved_text
from .correction import format_table
from .ctc import (
    INPUT_PATTERN,
    RESULT_LINEAGE,
    RESULT_PATTERN,
    TRUTH_LINEAGE,
    TRUTH_PATTERN,
    SequenceLayout,
    read_label_sequence,
    read_lineage,
    read_sequence,
    write_label_volume,
    write_lineage,
    write_volume,
)
from .errors import ConfigError, LayoutError, SegTrackError
from .metrics import det_score, format_report, format_report_json, op_scores, seg_score, tra_score
from .pipeline import segment_sequence
from .synth import generate_sequence, load_script
from .tracking import relabel_by_track, track_sequence

log = logging.getLogger(__name__)

RESOLVED_CONFIG = "config.resolved.txt"


def _load_config(args) -> PipelineConfig:
    return load_config(args.config) if args.config else PipelineConfig()


def _out_dir(path_str: str) -> Path:
    out = Path(path_str)
    out.mkdir(parents=True, exist_ok=True)
    return out


def cmd_segment(args) -> None:
    cfg = _load_config(args)
    layout = SequenceLayout(Path(args.input), INPUT_PATTERN)
    frames = read_sequence(layout, cfg.spacing)
    log.info("segmenting %d frame(s) from %s", len(frames), args.input)
    results = segment_sequence(frames, cfg, args.threads)
    out = _out_dir(args.output)
    for index, res in enumerate(results):
        write_label_volume(out / (RESULT_PATTERN % index), res.corrected)
        if args.keep_intermediates:
            write_label_volume(out / ("watershed%03d.tif" % index), res.watershed)
            write_label_volume(out / ("supervoxels%03d.tif" % index), res.supervoxels)
            (out / ("correlation%03d.txt" % index)).write_text(format_table(res.table))
    (out / RESOLVED_CONFIG).write_text(resolved_text(cfg))


def cmd_track(args) -> None:
    cfg = _load_config(args)
    layout = SequenceLayout(Path(args.input), RESULT_PATTERN)
    masks = read_label_sequence(layout, cfg.spacing)
    log.info("tracking %d frame(s) from %s", len(masks), args.input)
    result = track_sequence(masks, cfg.tracker_config())
    out = _out_dir(args.output)
    for index, (mask, mapping) in enumerate(zip(masks, result.frame_labels)):
        write_label_volume(out / (RESULT_PATTERN % index), relabel_by_track(mask, mapping))
    write_lineage(result.table, out / RESULT_LINEAGE)
    (out / RESOLVED_CONFIG).write_text(resolved_text(cfg))


def cmd_evaluate(args) -> None:
    cfg = _load_config(args)
    result_layout = SequenceLayout(Path(args.input), RESULT_PATTERN, RESULT_LINEAGE)
    truth_layout = SequenceLayout(Path(args.truth), TRUTH_PATTERN, TRUTH_LINEAGE)
    result = read_label_sequence(result_layout, cfg.spacing)
    truth = read_label_sequence(truth_layout, cfg.spacing)
    result_lineage = read_lineage(result_layout.lineage_path())
    truth_lineage = read_lineage(truth_layout.lineage_path())

    costs = cfg.aogm_costs()
    seg = seg_score(result, truth)
    det = det_score(result, truth, costs)
    tra = tra_score(result, result_lineage, truth, truth_lineage, costs)
    op_csb, op_ctb = op_scores(det, seg, tra)
    scores = {"seg": seg, "det": det, "tra": tra, "op_csb": op_csb, "op_ctb": op_ctb}

    report = format_report(scores, costs)
    sys.stdout.write(report)
    if args.output:
        out = _out_dir(args.output)
        (out / "report.txt").write_text(report)
        (out / "report.json").write_text(format_report_json(scores, costs))
        (out / RESOLVED_CONFIG).write_text(resolved_text(cfg))


def cmd_synth(args) -> None:
    script = load_script(args.input)
    if args.seed is not None:
        script = dataclasses.replace(script, seed=args.seed)
    seq = generate_sequence(script)
    out = _out_dir(args.output)
    truth_dir = _out_dir(str(Path(args.output) / "truth"))
    for index, frame in enumerate(seq.intensity):
        write_volume(out / (INPUT_PATTERN % index), frame)
    for index, frame in enumerate(seq.truth):
        write_label_volume(truth_dir / (TRUTH_PATTERN % index), frame)
    write_lineage(seq.lineage, truth_dir / TRUTH_LINEAGE)
    log.info("wrote %d frame(s) and truth to %s", len(seq.intensity), out)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="segtrack3d",
        description="Volumetric nucleus segmentation and tracking.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, output_required=True):
        p.add_argument("--config", help="key=value configuration file")
        p.add_argument("--output", required=output_required, help="output directory")

    p = sub.add_parser("segment", help="segment an intensity sequence into label masks")
    common(p)
    p.add_argument("--input", required=True, help="directory of t%%03d.tif frames")
    p.add_argument("--threads", type=int, default=1, help="worker pool size")
    p.add_argument(
        "--keep-intermediates",
        action="store_true",
        help="also write watershed labels, supervoxels, and overlap tables",
    )
    p.set_defaults(func=cmd_segment)

    p = sub.add_parser("track", help="link mask frames into tracks and a lineage file")
    common(p)
    p.add_argument("--input", required=True, help="directory of mask%%03d.tif frames")
    p.set_defaults(func=cmd_track)

    p = sub.add_parser("evaluate", help="score a result directory against ground truth")
    common(p, output_required=False)
    p.add_argument("--input", required=True, help="result directory (masks + res_track.txt)")
    p.add_argument("--truth", required=True, help="truth directory (man_track files)")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("synth", help="generate a synthetic sequence from a script")
    common(p)
    p.add_argument("--input", required=True, help="JSON scene script")
    p.add_argument("--seed", type=int, default=None, help="override the script's noise seed")
    p.set_defaults(func=cmd_synth)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(name)s: %(message)s")
    try:
        args.func(args)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 2
    except LayoutError as exc:
        print(f"layout error: {exc}", file=sys.stderr)
        return 3
    except (SegTrackError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 4
    return 0
