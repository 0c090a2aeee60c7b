"""Monocular semantic mapping with polygonal superpixels."""

from .core import CameraIntrinsics, CameraPose, back_project, project, rgb_to_cielab, transform_to_world
from .mapping import MapPolygon3D, MemoryStats, SemanticMap, accumulate, export_ply, lift_polygon
from .metrics import combined_loss, cross_entropy_loss, depth_metrics, scale_invariant_loss, segmentation_iou
from .pipeline import FrameBundle, FrameData, run_pipeline
from .polygonize import contour_to_polygon, rasterize_polygon, trace_boundary
from .refine import PlaneParams, RansacParams, apply_planes, fit_plane, ransac_ground
from .snic import SnicParams, SuperpixelPartition, init_seeds, run_snic, snic_distance

__version__ = "0.1.0"
