"""Dataset ingestion, orchestration, benchmarking, diagnostics, service."""

from .bench import benchmark, write_report
from .dataset import SceneDataset, load_dataset
from .heatmaps import colormap_cold_hot, emit_heatmaps, normalize_unit
from .service import create_app, intrinsics_from_fov, parse_pose_message, serve
from .session import PairIntermediates, RenderRequest, SessionState, render_novel_view

__all__ = [
    "PairIntermediates",
    "RenderRequest",
    "SceneDataset",
    "SessionState",
    "benchmark",
    "colormap_cold_hot",
    "create_app",
    "emit_heatmaps",
    "intrinsics_from_fov",
    "load_dataset",
    "normalize_unit",
    "parse_pose_message",
    "render_novel_view",
    "serve",
    "write_report",
]
