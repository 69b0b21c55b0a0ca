"""Command-line front end.

Subcommands: segment, track, eval, bench, gradcheck, synth. Exit codes:
0 success, 1 runtime failure, 2 malformed input or bad arguments. Frame
batches in ``segment`` and ``eval`` are processed in parallel; the
worker count comes from --jobs or the CENTERSEG_THREADS environment
variable.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from . import formats
from .clustering import dbscan, mean_shift
from .config import ALGORITHMS, FILTER_STRATEGIES, PipelineConfig
from .evaluation import map_eval
from .grids import DimensionMismatch, GridDims
from .instances import FrameResult, segment_frame
from .losses import run_gradient_checks
from .synth import SceneSpec, gen_sequence, gt_instances, perturb
from .tracking import TrackState, heatmap, track_metrics, update_tracks


def _add_config_flags(parser: argparse.ArgumentParser) -> None:
    group = parser.add_argument_group("pipeline config")
    group.add_argument("--config", type=Path, help="key=value config file")
    group.add_argument("--t", type=float, help="vote filter radius, px")
    group.add_argument("--min-neighbors", type=int, dest="min_neighbors")
    group.add_argument("--filter-strategy", choices=FILTER_STRATEGIES, dest="filter_strategy")
    group.add_argument("--eps", type=float, help="clustering radius, px")
    group.add_argument("--min-pts", type=int, dest="min_pts")
    group.add_argument("--rc2m", choices=("on", "off"), help="residual vote reassignment")
    group.add_argument("--algo", choices=ALGORITHMS)
    group.add_argument("--bandwidth", type=float)
    group.add_argument("--min-iou", type=float, dest="min_iou")
    group.add_argument("--fps", type=float)
    group.add_argument("--seed", type=int)


def _build_config(args: argparse.Namespace) -> PipelineConfig:
    cfg = formats.read_config(args.config) if args.config else PipelineConfig()
    for key in (
        "t", "min_neighbors", "filter_strategy", "eps", "min_pts",
        "algo", "bandwidth", "min_iou", "fps", "seed",
    ):
        value = getattr(args, key, None)
        if value is not None:
            setattr(cfg, key, value)
    if getattr(args, "rc2m", None) is not None:
        cfg.rc2m = args.rc2m == "on"
    cfg.validate()
    return cfg


def _n_jobs(args: argparse.Namespace) -> int:
    if getattr(args, "jobs", None):
        return max(1, args.jobs)
    env = os.environ.get("CENTERSEG_THREADS")
    return max(1, int(env)) if env else min(8, os.cpu_count() or 1)


def _cmd_segment(args: argparse.Namespace) -> int:
    cfg = _build_config(args)

    def run_one(sem_path: Path, off_path: Path, out_path: Path, frame_id: int):
        semantic = formats.read_semantic(sem_path)
        offsets = formats.read_offsets(off_path)
        result = segment_frame(semantic, offsets, cfg)
        formats.write_manifest(out_path, frame_id, semantic.dims, result.instances)
        return result.timings

    if args.batch_dir:
        sem_files = sorted(args.batch_dir.glob("*.ccsm"))
        if not sem_files:
            print(f"no .ccsm files in {args.batch_dir}", file=sys.stderr)
            return 2
        jobs = []
        for i, sem in enumerate(sem_files):
            off = sem.with_suffix(".ccof")
            if not off.exists():
                print(f"missing offset file for {sem}", file=sys.stderr)
                return 2
            jobs.append((sem, off, sem.with_suffix(".json"), i))
        with ThreadPoolExecutor(max_workers=_n_jobs(args)) as pool:
            timings = list(pool.map(lambda j: run_one(*j), jobs))
        if args.timings:
            args.timings.write_text(json.dumps(timings, sort_keys=True) + "\n")
        print(f"segmented {len(jobs)} frames into {args.batch_dir}")
        return 0

    if not (args.semantic and args.offsets and args.out):
        print("segment needs SEMANTIC OFFSETS --out OUT (or --batch-dir)", file=sys.stderr)
        return 2
    timing = run_one(args.semantic, args.offsets, args.out, args.frame_id)
    if args.timings:
        args.timings.write_text(json.dumps(timing, sort_keys=True) + "\n")
    print(f"wrote {args.out}")
    return 0


def _cmd_track(args: argparse.Namespace) -> int:
    cfg = _build_config(args)
    if not args.manifests:
        print("no frames", file=sys.stderr)
        return 2
    frames = []
    for i, path in enumerate(args.manifests):
        if not path.exists():
            print(f"frame {i}: missing manifest {path}", file=sys.stderr)
            return 2
        frames.append(formats.read_manifest(path))
    dims = frames[0][1]
    state = TrackState(dims=dims, fps=cfg.fps, min_iou=cfg.min_iou)
    for frame_id, fdims, instances in frames:
        if fdims != dims:
            raise DimensionMismatch(f"frame {frame_id} is {fdims.width}x{fdims.height}, expected {dims.width}x{dims.height}")
        update_tracks(state, FrameResult(instances=instances, unassigned_pixel_count=0, timings={}))

    out_dir = args.out_dir
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / "tracks.csv").write_text(formats.tracks_csv_dumps(state.rows))
    tracks = state.all_tracks()
    metrics = [track_metrics(t, state) for t in tracks]
    (out_dir / "metrics.csv").write_text(formats.metrics_csv_dumps(metrics))
    for t in tracks:
        counts = heatmap(t)
        (out_dir / f"track_{t.track_id:03d}_heatmap.pgm").write_bytes(formats.heatmap_pgm_bytes(counts))
        (out_dir / f"track_{t.track_id:03d}_counts.csv").write_text(formats.counts_csv_dumps(counts))
    print(f"tracked {len(frames)} frames, {len(tracks)} tracks -> {out_dir}")
    return 0


def _cmd_eval(args: argparse.Namespace) -> int:
    if len(args.pred) != len(args.gt):
        print(f"{len(args.pred)} prediction frames vs {len(args.gt)} ground-truth frames", file=sys.stderr)
        return 2

    def load(path: Path):
        return formats.read_manifest(path)[2]

    with ThreadPoolExecutor(max_workers=_n_jobs(args)) as pool:
        preds = list(pool.map(load, args.pred))
        gts = list(pool.map(load, args.gt))
    result = map_eval(preds, gts)
    for thr in sorted({t for _, t in result.per_class_threshold}):
        print(f"AP@{thr:.2f} = {result.per_threshold[thr]:.3f}")
    for cls, ap in sorted(result.per_class.items()):
        print(f"AP[{cls}] = {ap:.3f}")
    print(f"mAP = {result.map:.3f}")
    if not result.per_class and result.map == 0.0:
        print("warning: detections against an empty ground truth", file=sys.stderr)
    return 0


def _blobbed_points(n: int, seed: int) -> np.ndarray:
    """Uniformly scattered blob centers with tight Gaussian blobs."""
    rng = np.random.default_rng(seed)
    n_blobs = max(1, n // 1000)
    centers = rng.uniform(0, 4000, size=(n_blobs, 2))
    idx = rng.integers(0, n_blobs, size=n)
    return centers[idx] + rng.normal(0, 2.0, size=(n, 2))


def _cmd_bench(args: argparse.Namespace) -> int:
    cfg = _build_config(args)
    sizes = [int(s) for s in args.sizes.split(",") if s != ""]
    print("n,dbscan_s,mean_shift_s,ratio")
    for n in sizes:
        if n == 0:
            print("0,0.0,0.0,n/a")
            continue
        pts = _blobbed_points(n, cfg.seed)
        t0 = time.perf_counter()
        dbscan(pts, cfg.eps, cfg.min_pts)
        db_t = time.perf_counter() - t0
        t0 = time.perf_counter()
        mean_shift(pts, bandwidth=cfg.bandwidth, max_iter=cfg.ms_max_iter, shift_tol=cfg.shift_tol)
        ms_t = time.perf_counter() - t0
        ratio = "n/a" if db_t == 0 else f"{ms_t / db_t:.1f}"
        print(f"{n},{db_t:.3f},{ms_t:.3f},{ratio}")

    spec = SceneSpec(dims=GridDims(192, 144), n_piglets=8, seed=cfg.seed, n_random_occluders=2)
    frame = gen_sequence(spec, 1)[0]
    stage_cfg = PipelineConfig(min_pts=25, eps=cfg.eps, t=cfg.t, seed=cfg.seed)
    result = segment_frame(frame.semantic, frame.offsets, stage_cfg)
    print("stage,seconds")
    for stage, seconds in result.timings.items():
        print(f"{stage},{seconds:.4f}")
    return 0


def _cmd_gradcheck(args: argparse.Namespace) -> int:
    reports = run_gradient_checks(n_cases=args.n, seed=args.seed or 0, corrupt=args.corrupt)
    ok = True
    for rep in reports:
        status = "pass" if rep["passed"] else "FAIL"
        print(
            f"{rep['loss']}: max_rel_error={rep['max_rel_error']:.3e} "
            f"(case {rep['worst_case']}, component {rep['worst_component']}) {status}"
        )
        ok &= rep["passed"]
    return 0 if ok else 1


def _cmd_synth(args: argparse.Namespace) -> int:
    spec = formats.read_scene_spec(args.scene)
    frames = gen_sequence(spec, args.frames)
    out = args.out_dir
    out.mkdir(parents=True, exist_ok=True)
    for frame in frames:
        semantic, offsets = frame.semantic, frame.offsets
        if spec.noise.flip_rate > 0 or spec.noise.offset_sigma > 0:
            semantic, offsets = perturb(frame, spec.noise, seed=spec.seed * 100003 + frame.index)
        formats.write_semantic(out / f"frame_{frame.index:04d}.ccsm", semantic)
        formats.write_offsets(out / f"frame_{frame.index:04d}.ccof", offsets)
        formats.write_manifest(
            out / f"gt_{frame.index:04d}.json", frame.index, frame.dims, gt_instances(frame)
        )
    print(f"wrote {len(frames)} frames to {out}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="centerseg",
        description="Center-vote clustering instance segmentation tools",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("segment", help="segment one frame (or a directory batch)")
    p.add_argument("semantic", type=Path, nargs="?", help="semantic map (.ccsm)")
    p.add_argument("offsets", type=Path, nargs="?", help="offset map (.ccof)")
    p.add_argument("--out", type=Path, help="output instance manifest (.json)")
    p.add_argument("--frame-id", type=int, default=0)
    p.add_argument("--batch-dir", type=Path, help="directory of paired .ccsm/.ccof files")
    p.add_argument("--timings", type=Path, help="write per-stage wall times to this JSON file")
    p.add_argument("--jobs", type=int)
    _add_config_flags(p)
    p.set_defaults(func=_cmd_segment)

    p = sub.add_parser("track", help="track instances across ordered frame manifests")
    p.add_argument("manifests", type=Path, nargs="+")
    p.add_argument("--out-dir", type=Path, required=True)
    _add_config_flags(p)
    p.set_defaults(func=_cmd_track)

    p = sub.add_parser("eval", help="mAP of predictions against ground truth")
    p.add_argument("--pred", type=Path, nargs="+", required=True)
    p.add_argument("--gt", type=Path, nargs="+", required=True)
    p.add_argument("--jobs", type=int)
    p.set_defaults(func=_cmd_eval)

    p = sub.add_parser("bench", help="clustering speed comparison and stage breakdown")
    p.add_argument("--sizes", default="2000,10000,50000")
    _add_config_flags(p)
    p.set_defaults(func=_cmd_bench)

    p = sub.add_parser("gradcheck", help="finite-difference checks of the loss gradients")
    p.add_argument("--n", type=int, default=50)
    p.add_argument("--seed", type=int)
    p.add_argument("--corrupt", action="store_true", help="negative-control hook: corrupt one gradient component")
    p.set_defaults(func=_cmd_gradcheck)

    p = sub.add_parser("synth", help="generate synthetic frames from a scene file")
    p.add_argument("scene", type=Path, help="key=value scene spec")
    p.add_argument("--out-dir", type=Path, required=True)
    p.add_argument("--frames", type=int, default=1)
    p.set_defaults(func=_cmd_synth)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (formats.FormatError, DimensionMismatch) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
