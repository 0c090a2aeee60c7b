"""Command line entry point: ``polymap <subcommand> ...``."""
from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path

import numpy as np

from .core import CameraIntrinsics, srgb_to_lab
from .errors import FormatError, PolymapError
from .io import (
    DEFAULT_DEPTH_SCALE,
    load_assignment,
    load_config,
    load_depth,
    load_index,
    load_labels,
    load_poses,
    load_rgb,
    save_assignment,
    save_depth,
    write_centroids,
    write_planes,
    write_polygons,
)
from .labels import CATEGORY_MAP, NUM_CLASSES, ROAD
from .mapping import superpixel_labels
from .metrics import depth_metrics, segmentation_iou
from .pipeline import FrameBundle, run_pipeline
from .polygonize import polygonize_partition
from .refine import RansacParams, apply_planes, ransac_ground
from .snic import SnicParams, SuperpixelPartition, run_snic

log = logging.getLogger("polymap")

EXIT_OK, EXIT_CONFIG, EXIT_PARTIAL = 0, 1, 2


def _partition_from_grid(grid: np.ndarray) -> SuperpixelPartition:
    ids = np.unique(grid)
    dense = np.searchsorted(ids, grid).astype(np.int32)
    return SuperpixelPartition(dense, [], len(ids), grid.size)


def cmd_pipeline(args) -> int:
    overrides = {
        "k_superpixels": args.k_superpixels,
        "epsilon": args.epsilon,
        "color_mode": args.color_mode,
        "ply_format": args.ply_format,
        "rng_seed": args.rng_seed,
        "workers": args.workers,
        "poses": str(Path(args.poses).resolve()) if args.poses else None,
    }
    try:
        config = load_config(args.config, overrides)
        if config.poses is None:
            raise FormatError("no pose file: set poses= in the config or pass --poses")
        poses = load_poses(config.poses)
        entries = load_index(args.frames)
    except (PolymapError, OSError) as exc:
        log.error("configuration error: %s", exc)
        return EXIT_CONFIG
    if not entries:
        log.error("configuration error: frame index %s lists no frames", args.frames)
        return EXIT_CONFIG
    bundles, missing = [], {}
    for e in entries:
        if not 0 <= e.frame_id < len(poses):
            missing[e.frame_id] = f"no pose for frame {e.frame_id} ({len(poses)} poses loaded)"
            continue
        bundles.append(FrameBundle(e.frame_id, e.rgb, e.depth, e.labels, poses[e.frame_id]))
    for fid, why in missing.items():
        log.error("frame %d skipped: %s", fid, why)
    if not bundles:
        return EXIT_PARTIAL
    result = run_pipeline(config, bundles, args.out)
    for fid, t in result.timings:
        log.info("frame %d: %.3fs", fid, sum(t.values()))
    print(result.stats.report(), end="")
    print(f"polygons={len(result.semantic_map.polygons)}")
    print(f"frames_ok={result.semantic_map.frame_count}")
    failed = len(result.failed_frames) + len(missing)
    print(f"frames_failed={failed}")
    return EXIT_PARTIAL if failed else EXIT_OK


def cmd_superpixel(args) -> int:
    rgb = load_rgb(args.rgb)
    labels = load_labels(args.labels) if args.labels else None
    params = SnicParams(args.k, args.spatial_norm, args.color_norm, args.semantic_penalty)
    part = run_snic(srgb_to_lab(rgb), labels, params)
    save_assignment(args.out, part.assignment)
    if args.centroids:
        write_centroids(args.centroids, part)
    print(f"superpixels={part.k_actual}")
    return EXIT_OK


def cmd_refine(args) -> int:
    depth, mask = load_depth(args.depth, args.depth_scale)
    part = _partition_from_grid(load_assignment(args.assignment))
    refined, rmask, planes = apply_planes(part, depth, mask)
    status = "skipped"
    if args.labels and not args.no_ransac:
        if args.fx is None:
            raise FormatError("road smoothing needs --fx --fy --cx --cy (or pass --no-ransac)")
        k = CameraIntrinsics(args.fx, args.fy, args.cx, args.cy)
        res = ransac_ground(refined, load_labels(args.labels), args.road_class, k, RansacParams(args.rng_seed), rmask)
        refined, status = res.depth, res.status
    save_depth(args.out, refined, args.depth_scale)
    if args.planes:
        write_planes(args.planes, planes)
    print(f"superpixels={part.k_actual}")
    print(f"ransac={status}")
    return EXIT_OK


def cmd_polygonize(args) -> int:
    part = _partition_from_grid(load_assignment(args.assignment))
    labels = superpixel_labels(part, load_labels(args.labels)) if args.labels else None
    polys, failures = polygonize_partition(part, args.epsilon)
    write_polygons(args.out, polys, labels)
    for sp, exc in failures.items():
        log.warning("superpixel %d not polygonized: %s", sp, exc)
    print(f"polygons={len(polys)}")
    print(f"vertices={sum(len(p) for p in polys)}")
    print(f"failed={len(failures)}")
    return EXIT_PARTIAL if failures else EXIT_OK


def cmd_evaluate(args) -> int:
    report: dict[str, object] = {}
    if args.pred_depth and args.gt_depth:
        pred, pmask = load_depth(args.pred_depth, args.depth_scale)
        gt, gmask = load_depth(args.gt_depth, args.depth_scale)
        report.update(depth_metrics(pred, gt, pmask & gmask).as_dict())
    if args.pred_labels and args.gt_labels:
        seg = segmentation_iou(load_labels(args.pred_labels), load_labels(args.gt_labels), NUM_CLASSES, CATEGORY_MAP)
        report["mean_iou_class"] = seg.mean_iou_class
        report["mean_iou_category"] = seg.mean_iou_category
        report["per_class_iou"] = seg.as_dict()["per_class_iou"]
    if not report:
        raise FormatError("nothing to evaluate: give --pred-depth/--gt-depth and/or --pred-labels/--gt-labels")
    for key, value in report.items():
        if isinstance(value, list):
            value = ",".join("nan" if x is None else f"{x:.6f}" for x in value)
        elif isinstance(value, float):
            value = f"{value:.6f}"
        print(f"{key}={value}")
    if args.json:
        Path(args.json).write_text(json.dumps(report, indent=2) + "\n")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="polymap", description="Monocular semantic polygon mapping.")
    sub = p.add_subparsers(dest="command", required=True)

    pp = sub.add_parser("pipeline", help="run the full per-frame pipeline and export the map")
    pp.add_argument("--config", required=True)
    pp.add_argument("--frames", required=True, help="index file: 'frame_id rgb depth labels' per line")
    pp.add_argument("--out", required=True)
    pp.add_argument("--poses")
    pp.add_argument("--k-superpixels", type=int)
    pp.add_argument("--epsilon", type=float)
    pp.add_argument("--color-mode", choices=("semantic", "rgb"))
    pp.add_argument("--ply-format", choices=("ascii", "binary"))
    pp.add_argument("--rng-seed", type=int)
    pp.add_argument("--workers", type=int)
    pp.set_defaults(func=cmd_pipeline)

    sp = sub.add_parser("superpixel", help="semantic SNIC on one image")
    sp.add_argument("--rgb", required=True)
    sp.add_argument("--labels")
    sp.add_argument("--out", required=True, help="16-bit superpixel id raster")
    sp.add_argument("--centroids", help="centroid summary text file")
    sp.add_argument("--k", type=int, default=400)
    sp.add_argument("--spatial-norm", type=float)
    sp.add_argument("--color-norm", type=float, default=100.0)
    sp.add_argument("--semantic-penalty", type=float, default=10.0)
    sp.set_defaults(func=cmd_superpixel)

    rp = sub.add_parser("refine", help="per-superpixel plane fitting and road smoothing")
    rp.add_argument("--depth", required=True)
    rp.add_argument("--assignment", required=True)
    rp.add_argument("--labels")
    rp.add_argument("--out", required=True)
    rp.add_argument("--planes", help="plane parameter file: 'id valid a b c' per line")
    rp.add_argument("--depth-scale", type=float, default=DEFAULT_DEPTH_SCALE)
    rp.add_argument("--fx", type=float)
    rp.add_argument("--fy", type=float)
    rp.add_argument("--cx", type=float)
    rp.add_argument("--cy", type=float)
    rp.add_argument("--road-class", type=int, default=ROAD)
    rp.add_argument("--rng-seed", type=int, default=0)
    rp.add_argument("--no-ransac", action="store_true")
    rp.set_defaults(func=cmd_refine)

    gp = sub.add_parser("polygonize", help="trace superpixels into polygons")
    gp.add_argument("--assignment", required=True)
    gp.add_argument("--labels")
    gp.add_argument("--out", required=True)
    gp.add_argument("--epsilon", type=float, default=0.0)
    gp.set_defaults(func=cmd_polygonize)

    ep = sub.add_parser("evaluate", help="depth and segmentation metrics")
    ep.add_argument("--pred-depth")
    ep.add_argument("--gt-depth")
    ep.add_argument("--pred-labels")
    ep.add_argument("--gt-labels")
    ep.add_argument("--depth-scale", type=float, default=DEFAULT_DEPTH_SCALE)
    ep.add_argument("--json")
    ep.set_defaults(func=cmd_evaluate)
    return p


def main(argv=None) -> int:
    logging.basicConfig(
        level=os.environ.get("POLYMAP_LOG", "WARNING").upper(),
        format="%(levelname)s %(name)s: %(message)s",
    )
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (PolymapError, OSError) as exc:
        log.error("%s", exc)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
