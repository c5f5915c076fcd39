"""Benchmark harness: source-processing vs novel-view timing split."""

import json
import statistics
from pathlib import Path

from .dataset import SceneDataset
from .session import SessionState, render_novel_view


def benchmark(
    dataset: SceneDataset,
    requests: list,
    repetitions: int = 5,
    warmup: int = 1,
    session: SessionState | None = None,
    concurrent_views: tuple = (1, 10),
) -> dict:
    """Time the pipeline over a pose list.

    The first request of each run is a cold (frame, pair) miss giving the
    source-processing time; subsequent repetitions re-render through the
    cache and time the splatting stage alone. The concurrent estimate for
    n views follows T = T_src + n * T_novel.
    """
    session = session or SessionState()
    t_src_samples = []
    t_novel_samples = []
    stage = {"ms_project": [], "ms_sort": [], "ms_blend": []}
    gaussians = 0
    resolution = None

    for req in requests:
        session.invalidate()
        for _ in range(warmup):
            render_novel_view(dataset, req, session)
        session.invalidate()
        frame, _, tm = render_novel_view(dataset, req, session)
        t_src_samples.append(tm["t_src_ms"])
        gaussians = tm["gaussians"]
        resolution = [req.intrinsics.width, req.intrinsics.height]
        for _ in range(repetitions):
            frame, _, tm = render_novel_view(dataset, req, session)
            t_novel_samples.append(tm["t_render_ms"])
            for k in stage:
                stage[k].append(tm.get(k, 0.0))

    t_src_med = statistics.median(t_src_samples)
    t_novel_med = statistics.median(t_novel_samples)
    report = {
        "gaussians": gaussians,
        "resolution": resolution,
        "ms_project": statistics.median(stage["ms_project"]),
        "ms_sort": statistics.median(stage["ms_sort"]),
        "ms_blend": statistics.median(stage["ms_blend"]),
        "fps": 1000.0 / t_novel_med if t_novel_med > 0 else float("inf"),
        "t_src_ms": {
            "mean": statistics.fmean(t_src_samples),
            "median": t_src_med,
            "min": min(t_src_samples),
        },
        "t_novel_ms": {
            "mean": statistics.fmean(t_novel_samples),
            "median": t_novel_med,
            "min": min(t_novel_samples),
        },
        "concurrent": {
            str(n): {
                "total_ms": t_src_med + n * t_novel_med,
                "fps": 1000.0 * n / (t_src_med + n * t_novel_med),
            }
            for n in concurrent_views
        },
    }
    return report


def write_report(report: dict, path) -> None:
    Path(path).write_text(json.dumps(report, indent=2), encoding="utf-8")
