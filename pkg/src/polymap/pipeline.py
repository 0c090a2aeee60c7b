"""End-to-end frame processing: superpixels, refinement, polygons, world map."""
from __future__ import annotations

import logging
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .core import CameraPose, srgb_to_lab
from .errors import DegenerateGeometryError, DegenerateRegionError, NotFoundError, PolymapError, RejectedInputError
from .io import PipelineConfig, load_depth, load_labels, load_rgb
from .labels import load_palette
from .mapping import MapPolygon3D, MemoryStats, SemanticMap, accumulate, export_ply, lift_polygon, superpixel_labels
from .polygonize import contour_to_polygon, trace_boundary
from .refine import apply_planes, ransac_ground
from .snic import SuperpixelPartition, run_snic

log = logging.getLogger(__name__)

STAGES = ("superpixel", "refine", "ransac", "polygonize", "lift")


@dataclass(frozen=True)
class FrameBundle:
    frame_id: int
    rgb: Path
    depth: Path
    labels: Path
    pose: CameraPose

    def load(self, depth_scale: float) -> "FrameData":
        rgb = load_rgb(self.rgb)
        depth, mask = load_depth(self.depth, depth_scale)
        labels = load_labels(self.labels)
        if not (rgb.shape[:2] == depth.shape == labels.shape):
            raise RejectedInputError(
                f"frame {self.frame_id}: raster sizes differ (rgb {rgb.shape[:2]}, depth {depth.shape}, labels {labels.shape})"
            )
        return FrameData(self.frame_id, rgb, depth, labels, self.pose, mask)


@dataclass(frozen=True, eq=False)
class FrameData:
    """In-memory frame: RGB uint8 ``(H, W, 3)``, depth in metres, labels, pose."""

    frame_id: int
    rgb: np.ndarray
    depth: np.ndarray
    labels: np.ndarray
    pose: CameraPose
    mask: np.ndarray | None = None


@dataclass(eq=False)
class FrameResult:
    frame_id: int
    polygons: list[MapPolygon3D]
    timings: dict[str, float]
    partition: SuperpixelPartition | None = None
    refined_depth: np.ndarray | None = None
    ransac_status: str = ""
    skipped_superpixels: dict[int, str] = field(default_factory=dict)


@dataclass(eq=False)
class PipelineResult:
    semantic_map: SemanticMap
    stats: MemoryStats
    timings: list[tuple[int, dict[str, float]]]
    failed_frames: dict[int, str]
    frames: list[FrameResult]
    ply_path: Path | None = None

    @property
    def exit_code(self) -> int:
        return 2 if self.failed_frames else 0


def process_frame(config: PipelineConfig, frame: FrameData) -> FrameResult:
    k = config.intrinsics
    timings = {}
    t0 = time.perf_counter()
    lab = srgb_to_lab(frame.rgb)
    partition = run_snic(lab, frame.labels, config.snic)
    t1 = time.perf_counter()
    timings["superpixel"] = t1 - t0

    refined, rmask, planes = apply_planes(partition, frame.depth, frame.mask)
    t2 = time.perf_counter()
    timings["refine"] = t2 - t1

    ransac = ransac_ground(refined, frame.labels, config.road_class, k, config.ransac, rmask)
    depth = ransac.depth
    valid = depth > 0
    t3 = time.perf_counter()
    timings["ransac"] = t3 - t2

    sp_labels = superpixel_labels(partition, frame.labels)
    ids = partition.assignment.ravel()
    kk = partition.k_actual
    dense = np.bincount(ids, valid.ravel().astype(np.int64), kk).astype(np.int64)
    counts = np.bincount(ids, minlength=kk).astype(np.float64)
    mean_rgb = np.stack(
        [np.bincount(ids, frame.rgb[:, :, c].ravel().astype(np.float64), kk) / counts for c in range(3)], axis=1
    )
    mean_rgb = np.clip(np.rint(mean_rgb), 0, 255).astype(int)

    skipped: dict[int, str] = {}
    polys2d = {}
    for sp in range(kk):
        if sp_labels[sp] == config.sky_class:
            continue
        try:
            polys2d[sp] = contour_to_polygon(trace_boundary(partition, sp), config.epsilon, sp)
        except (DegenerateRegionError, NotFoundError) as exc:
            skipped[sp] = str(exc)
    t4 = time.perf_counter()
    timings["polygonize"] = t4 - t3

    lifted = []
    for sp, poly in polys2d.items():
        use_ground = ransac.plane is not None and sp_labels[sp] == config.road_class
        try:
            lifted.append(
                lift_polygon(
                    poly,
                    planes[sp],
                    k,
                    frame.pose,
                    semantic_label=int(sp_labels[sp]),
                    rgb=mean_rgb[sp],
                    frame_id=frame.frame_id,
                    ground=ransac.plane if use_ground else None,
                    dense_points=int(dense[sp]),
                )
            )
        except DegenerateGeometryError as exc:
            skipped[sp] = str(exc)
    timings["lift"] = time.perf_counter() - t4
    for sp, why in sorted(skipped.items()):
        log.info("frame %d: superpixel %d skipped: %s", frame.frame_id, sp, why)
    return FrameResult(frame.frame_id, lifted, timings, partition, depth, ransac.status, skipped)


def _process_bundle(args):
    config, bundle = args
    try:
        frame = bundle.load(config.depth_scale) if isinstance(bundle, FrameBundle) else bundle
        return process_frame(config, frame), None
    except (PolymapError, OSError) as exc:
        return None, f"{type(exc).__name__}: {exc}"


def run_pipeline(config: PipelineConfig, frames, out_dir=None, keep_frames: bool = False) -> PipelineResult:
    """Process frames (``FrameBundle`` or ``FrameData``) and accumulate the map.

    Frames that fail are logged and skipped. When ``out_dir`` is given the
    map, memory statistics and timing report are written there.
    """
    frames = list(frames)
    if not frames:
        raise RejectedInputError("no frames to process")
    jobs = [(config, f) for f in frames]
    if config.workers > 1 and len(frames) > 1:
        with ProcessPoolExecutor(max_workers=config.workers) as pool:
            outcomes = list(pool.map(_process_bundle, jobs))
    else:
        outcomes = [_process_bundle(j) for j in jobs]

    smap = SemanticMap(sky_class=config.sky_class)
    failed: dict[int, str] = {}
    results = []
    for frame, (res, err) in sorted(zip(frames, outcomes), key=lambda pair: pair[0].frame_id):
        if err is not None:
            log.error("frame %d skipped: %s", frame.frame_id, err)
            failed[frame.frame_id] = err
            continue
        smap = accumulate(smap, res.frame_id, res.polygons)
        if not keep_frames:
            res.partition = None
            res.refined_depth = None
        results.append(res)

    timings = [(r.frame_id, r.timings) for r in results]
    out = PipelineResult(smap, smap.stats, timings, failed, results)
    if out_dir is not None:
        out_dir = Path(out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        if smap.polygons:
            palette = load_palette(config.palette)
            out.ply_path = export_ply(smap, out_dir / "map.ply", config.color_mode, palette, config.binary_ply)
        (out_dir / "stats.txt").write_text(
            smap.stats.report() + f"polygons={len(smap.polygons)}\nframes={smap.frame_count}\n"
            f"failed_frames={len(failed)}\n"
        )
        write_timings(out_dir / "timings.txt", timings, failed)
    return out


def write_timings(path, timings, failed=None) -> None:
    lines = ["# frame_id " + " ".join(STAGES) + " total (seconds)"]
    for fid, t in sorted(timings):
        vals = [t.get(s, 0.0) for s in STAGES]
        lines.append(f"{fid} " + " ".join(f"{x:.4f}" for x in vals) + f" {sum(vals):.4f}")
    for fid, why in sorted((failed or {}).items()):
        lines.append(f"# frame {fid} failed: {why}")
    Path(path).write_text("\n".join(lines) + "\n")
