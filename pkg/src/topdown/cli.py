"""Command-line front end.

Thin facade over the library: every subcommand is a direct wiring of the
module-level functions, so CLI output always equals the equivalent library
calls.  Outputs are written to a temporary file and renamed into place, so a
failing command never leaves partial files behind.

Exit codes: 0 success, 1 usage error, 2 input/parse error, 3 contract
violation.  ``TOPDOWN_LOG`` sets the log level.
"""
from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path

from . import ensemble as ensemble_mod
from . import heatmaps, metrics, pipeline, synth
from .geometry import DegenerateGeometryError, bbox_from_keypoints
from .metrics import EvaluationError
from .model import Sequence, SequenceError, load_sequence, save_predictions
from .pipeline import PipelineConfig, PipelineContractError
from .tracker import TrackingError

log = logging.getLogger("topdown")

EXIT_USAGE = 1
EXIT_PARSE = 2
EXIT_CONTRACT = 3


class _UsageError(Exception):
    pass


class _InputError(Exception):
    """Unparseable config or spec document."""


class _Parser(argparse.ArgumentParser):
    def error(self, message: str):  # argparse default exits with 2; we reserve that
        raise _UsageError(message)


def _write_atomic(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_text(text)
    os.replace(tmp, path)


def _read_text(path: str) -> str:
    p = Path(path)
    if not p.exists():
        raise FileNotFoundError(f"input file not found: {path}")
    return p.read_text()


def _load_sequences(path: str) -> list[Sequence]:
    """Load one sequence file, or every ``*.json`` in a directory (sorted)."""
    p = Path(path)
    if p.is_dir():
        files = sorted(p.glob("*.json"))
        if not files:
            raise FileNotFoundError(f"no *.json sequence files in directory: {path}")
        return [load_sequence(f.read_text()) for f in files]
    return [load_sequence(_read_text(path))]


def _load_config(args) -> PipelineConfig:
    doc: dict = {}
    if getattr(args, "config", None):
        doc = json.loads(_read_text(args.config))
    try:
        config = PipelineConfig.from_dict(doc)
    except ValueError as exc:
        raise _InputError(f"{getattr(args, 'config', 'config')}: {exc}") from exc
    overrides = {}
    for flag, name in (
        ("candidate_threshold", "candidate_drop_threshold"),
        ("keypoint_threshold", "keypoint_drop_threshold"),
        ("nms_iou", "nms_iou_threshold"),
        ("ensemble_mode", "ensemble_mode"),
    ):
        value = getattr(args, flag, None)
        if value is not None:
            overrides[name] = value
    if overrides:
        from dataclasses import replace

        config = replace(config, **overrides)
    return config


def _dump_reports(out_dir: Path, result: pipeline.PipelineResult) -> None:
    for seq in result.tracked:
        _write_atomic(out_dir / f"tracked_{seq.name}.json", save_predictions(seq))
    _write_atomic(out_dir / "ap_report.json", json.dumps(result.ap.to_dict(), indent=2))
    _write_atomic(out_dir / "ap_report.csv", result.ap.to_csv())
    _write_atomic(out_dir / "mot_report.json", json.dumps(result.mot.to_dict(), indent=2))
    _write_atomic(out_dir / "mot_report.csv", result.mot.to_csv())


def _cmd_run(args) -> int:
    config = _load_config(args)
    det_seqs = _load_sequences(args.det)
    gt_seqs = _load_sequences(args.gt)
    det_b = _load_sequences(args.det_b) if args.det_b else None
    result = pipeline.run_pipeline(det_seqs, gt_seqs, config, det_b)
    out_dir = Path(args.out)
    _dump_reports(out_dir, result)
    print(f"AP total: {result.ap.total:.4f}")
    print(f"MOTA total: {result.mot.mota_total:.4f}")
    print(f"reports written to {out_dir}")
    return 0


def _cmd_sweep(args) -> int:
    config = _load_config(args)
    det_seqs = _load_sequences(args.det)
    gt_seqs = _load_sequences(args.gt)
    try:
        values = [float(v) for v in args.values.split(",") if v.strip()]
    except ValueError as exc:
        raise _UsageError(f"bad --values: {exc}") from exc
    if len(values) < 2:
        raise _UsageError("--values needs at least 2 comma-separated thresholds")
    rows = pipeline.sweep(det_seqs, gt_seqs, config, args.axis, values, jobs=args.jobs)
    csv_text = pipeline.sweep_csv(args.axis, rows)
    json_text = json.dumps([r.to_dict() for r in rows], indent=2)
    out_dir = Path(args.out)
    _write_atomic(out_dir / "sweep.csv", csv_text)
    _write_atomic(out_dir / "sweep.json", json_text)
    print(csv_text, end="")
    return 0


def _cmd_synth(args) -> int:
    doc = json.loads(_read_text(args.spec))
    if "synth" in doc:  # generator section embedded in a pipeline config
        doc = doc["synth"]
    try:
        spec = synth.SynthSpec.from_dict(doc)
    except ValueError as exc:
        raise _InputError(f"{args.spec}: {exc}") from exc
    if args.seed is not None:
        from dataclasses import replace

        spec = replace(spec, seed=args.seed)
    out = synth.generate(spec)
    out_dir = Path(args.out)
    _write_atomic(out_dir / "gt.json", save_predictions(out.gt))
    _write_atomic(out_dir / "det.json", save_predictions(out.det))
    _write_atomic(out_dir / "provenance.json", out.provenance_to_json())
    print(f"synthetic sequences written to {out_dir}")
    return 0


def _cmd_eval(args) -> int:
    config = _load_config(args)
    preds = _load_sequences(args.preds)
    gts = _load_sequences(args.gt)
    if args.mode == "ap":
        report = metrics.evaluate_ap(preds, gts, config.pckh)
    else:
        report = metrics.evaluate_mot(preds, gts, config.pckh)
    text = json.dumps(report.to_dict(), indent=2)
    if args.out:
        out_dir = Path(args.out)
        _write_atomic(out_dir / f"{args.mode}_report.json", text)
        _write_atomic(out_dir / f"{args.mode}_report.csv", report.to_csv())
        print(f"report written to {out_dir}")
    else:
        print(text)
    return 0


def _cmd_decode(args) -> int:
    stack = heatmaps.load_stack_json(_read_text(args.maps))
    if args.radius is not None:
        decoded = heatmaps.decode_stack(stack, radius=args.radius, refine=not args.no_refine)
        keypoints = decoded.keypoints
        fallbacks = [j.value for j in decoded.fallbacks]
    else:
        keypoints = tuple(
            heatmaps.decode_argmax(m, stack.origin, refine=not args.no_refine)
            for m in stack.maps
        )
        fallbacks = []
    doc = {
        "keypoints": [
            {"joint": kp.joint.value, "x": kp.x, "y": kp.y, "confidence": kp.confidence}
            for kp in keypoints
        ],
        "fallbacks": fallbacks,
    }
    text = json.dumps(doc, indent=2)
    if args.out:
        _write_atomic(Path(args.out), text)
    else:
        print(text)
    return 0


def _cmd_bbox_infer(args) -> int:
    from dataclasses import replace

    seqs = _load_sequences(args.input)
    out = []
    for seq in seqs:
        frames = []
        for frame in seq.frames:
            poses = []
            for pose in frame.poses:
                if pose.bbox is None:
                    pose = replace(pose, bbox=bbox_from_keypoints(pose, args.enlarge))
                poses.append(pose)
            frames.append(replace(frame, poses=tuple(poses)))
        out.append(replace(seq, frames=tuple(frames)))
    if args.out:
        out_dir = Path(args.out)
        for seq in out:
            _write_atomic(out_dir / f"{seq.name}.json", save_predictions(seq))
        print(f"sequences written to {out_dir}")
    else:
        for seq in out:
            print(save_predictions(seq))
    return 0


def _cmd_ensemble(args) -> int:
    config = _load_config(args)
    seqs_a = _load_sequences(args.a)
    seqs_b = _load_sequences(args.b)
    if len(seqs_a) != len(seqs_b):
        raise PipelineContractError(
            f"model A has {len(seqs_a)} sequences, model B has {len(seqs_b)}"
        )
    from dataclasses import replace

    fused_seqs = []
    seqs_a = sorted(seqs_a, key=lambda s: s.name)
    seqs_b = sorted(seqs_b, key=lambda s: s.name)
    for a, b in zip(seqs_a, seqs_b):
        if a.name != b.name or len(a.frames) != len(b.frames):
            raise PipelineContractError(f"sequences misaligned: {a.name!r} vs {b.name!r}")
        frames = []
        for fa, fb in zip(a.frames, b.frames):
            if len(fa.poses) != len(fb.poses):
                raise PipelineContractError(
                    f"frame {fa.index}: pose counts differ ({len(fa.poses)} vs {len(fb.poses)})"
                )
            if args.mode == "average":
                poses = tuple(
                    ensemble_mod.fuse_average(pa, pb) for pa, pb in zip(fa.poses, fb.poses)
                )
            else:
                poses = tuple(
                    ensemble_mod.fuse_expert(pa, pb, config.expert_map)
                    for pa, pb in zip(fa.poses, fb.poses)
                )
            frames.append(replace(fa, poses=poses))
        fused_seqs.append(replace(a, frames=tuple(frames)))
    if args.out:
        out_dir = Path(args.out)
        for seq in fused_seqs:
            _write_atomic(out_dir / f"fused_{seq.name}.json", save_predictions(seq))
        print(f"fused sequences written to {out_dir}")
    else:
        for seq in fused_seqs:
            print(save_predictions(seq))
    return 0


def _build_parser() -> _Parser:
    parser = _Parser(prog="topdown", description="Pose-tracking pipeline and evaluation harness")
    sub = parser.add_subparsers(dest="command", required=True)

    def add_config(p):
        p.add_argument("--config", help="pipeline config JSON (schema 1); flags override")
        p.add_argument("--candidate-threshold", dest="candidate_threshold", type=float)
        p.add_argument("--keypoint-threshold", dest="keypoint_threshold", type=float)
        p.add_argument("--nms-iou", dest="nms_iou", type=float)

    run = sub.add_parser("run", help="full pipeline: prune, NMS, fuse, track, score")
    add_config(run)
    run.add_argument("--det", required=True, help="predictions file or directory")
    run.add_argument("--det-b", dest="det_b", help="second model predictions for fusion")
    run.add_argument("--ensemble-mode", dest="ensemble_mode", choices=("none", "average", "expert"))
    run.add_argument("--gt", required=True, help="ground-truth file or directory")
    run.add_argument("--out", required=True, help="output directory")
    run.set_defaults(func=_cmd_run)

    sweep = sub.add_parser("sweep", help="threshold sensitivity sweep")
    add_config(sweep)
    sweep.add_argument("--det", required=True)
    sweep.add_argument("--gt", required=True)
    sweep.add_argument("--out", required=True)
    sweep.add_argument("--axis", required=True, choices=pipeline.SWEEP_AXES)
    sweep.add_argument("--values", required=True, help="comma-separated thresholds")
    sweep.add_argument("--jobs", type=int, default=1, help="parallel sweep points")
    sweep.set_defaults(func=_cmd_sweep)

    synth_cmd = sub.add_parser("synth", help="generate a synthetic gt/det pair")
    synth_cmd.add_argument("--spec", required=True, help="generator spec JSON")
    synth_cmd.add_argument("--seed", type=int, help="override the spec seed")
    synth_cmd.add_argument("--out", required=True)
    synth_cmd.set_defaults(func=_cmd_synth)

    eval_cmd = sub.add_parser("eval", help="score predictions against ground truth")
    add_config(eval_cmd)
    eval_cmd.add_argument("--preds", required=True)
    eval_cmd.add_argument("--gt", required=True)
    eval_cmd.add_argument("--mode", required=True, choices=("ap", "mot"))
    eval_cmd.add_argument("--out")
    eval_cmd.set_defaults(func=_cmd_eval)

    decode = sub.add_parser("decode", help="decode a heatmap fixture to keypoints")
    decode.add_argument("--maps", required=True, help="heatmap fixture JSON")
    decode.add_argument("--radius", type=float, help="cross-map suppression radius (px)")
    decode.add_argument("--no-refine", action="store_true", help="disable sub-cell refinement")
    decode.add_argument("--out")
    decode.set_defaults(func=_cmd_decode)

    bbox = sub.add_parser("bbox-infer", help="fill missing pose boxes from keypoints")
    bbox.add_argument("--input", required=True)
    bbox.add_argument("--enlarge", type=float, default=0.20)
    bbox.add_argument("--out")
    bbox.set_defaults(func=_cmd_bbox_infer)

    ens = sub.add_parser("ensemble", help="fuse two models' predictions")
    add_config(ens)
    ens.add_argument("--a", required=True, help="model A predictions")
    ens.add_argument("--b", required=True, help="model B predictions")
    ens.add_argument("--mode", required=True, choices=("average", "expert"))
    ens.add_argument("--out")
    ens.set_defaults(func=_cmd_ensemble)

    return parser


def main(argv: list[str] | None = None) -> int:
    logging.basicConfig(level=os.environ.get("TOPDOWN_LOG", "WARNING").upper())
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
        return args.func(args)
    except _UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (FileNotFoundError, SequenceError, json.JSONDecodeError, _InputError) as exc:
        print(f"input error: {exc}", file=sys.stderr)
        return EXIT_PARSE
    except (
        PipelineContractError,
        EvaluationError,
        TrackingError,
        DegenerateGeometryError,
        ValueError,
    ) as exc:
        print(f"contract violation: {exc}", file=sys.stderr)
        return EXIT_CONTRACT


if __name__ == "__main__":
    sys.exit(main())
