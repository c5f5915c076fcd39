"""Command-line interface.

    splatstereo --dataset DIR [options] SUBCOMMAND ...

Subcommands: render, depth, export-ply, heatmaps, bench, refine, serve.
Pose files are JSON {"R": [9], "t": [3], "fov_deg": f, "width": w,
"height": h} matching the service's pose messages.
"""

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from ..errors import SplatStereoError
from ..gaussians.ply import save_ply
from ..geometry.camera import CameraPose
from ..imgio import save_png, save_raw_planar
from ..stereo.matcher import StereoConfig
from .bench import benchmark, write_report
from .dataset import load_dataset
from .heatmaps import emit_heatmaps
from .service import intrinsics_from_fov, serve
from .session import RenderRequest, SessionState, render_novel_view

logger = logging.getLogger(__name__)


def _load_pose_file(path) -> tuple:
    data = json.loads(Path(path).read_text(encoding="utf-8"))
    pose = CameraPose(
        rotation=np.asarray(data["R"], dtype=np.float64).reshape(3, 3),
        translation=np.asarray(data["t"], dtype=np.float64).reshape(3),
    )
    intr = intrinsics_from_fov(float(data["fov_deg"]), int(data["width"]), int(data["height"]))
    return pose, intr


def _session(args) -> SessionState:
    cfg = StereoConfig.from_json(args.config) if args.config else StereoConfig()
    return SessionState(stereo_config=cfg)


def _request(args, extra=()) -> RenderRequest:
    pose, intr = _load_pose_file(args.pose)
    return RenderRequest(
        frame=args.frame,
        intrinsics=intr,
        pose=pose,
        refine_steps=getattr(args, "refine_steps", 0),
        refine_lr=getattr(args, "refine_lr", 1.0),
        exclude_cameras=tuple(extra),
    )


def _out_path(args, name) -> Path:
    base = Path(args.output) if args.output else Path(".")
    base.mkdir(parents=True, exist_ok=True)
    return base / name


def _pair_intermediates(dataset, args, session):
    """Source-pair intermediates for the depth/export/heatmap commands."""
    from .session import _build_pair

    if args.cameras:
        pair_ids = tuple(args.cameras.split(","))
        if len(pair_ids) != 2:
            raise SplatStereoError("--cameras expects exactly two ids, e.g. cam0,cam2")
    else:
        if not args.pose:
            raise SplatStereoError("provide --cameras L,R or --pose POSE.json")
        pose, _ = _load_pose_file(args.pose)
        from ..geometry.selection import select_source_pair

        pair_ids = select_source_pair(dataset.rig, pose.camera_center)
    return _build_pair(dataset, args.frame, pair_ids, session)


def cmd_render(dataset, args) -> int:
    session = _session(args)
    exclude = args.exclude.split(",") if args.exclude else ()
    req = _request(args, extra=exclude)
    frame, report, timings = render_novel_view(dataset, req, session)
    out = _out_path(args, args.out)
    save_png(out, frame.color)
    if args.raw:
        save_raw_planar(out.with_suffix(".raw"), frame.color)
    print(f"wrote {out} | source {timings['t_src_ms']:.1f} ms, render {timings['t_render_ms']:.1f} ms, "
          f"pair {timings['pair']}, {timings['gaussians']} gaussians")
    return 0


def cmd_depth(dataset, args) -> int:
    session = _session(args)
    inter = _pair_intermediates(dataset, args, session)
    for side, depth in (("left", inter.depth_left), ("right", inter.depth_right)):
        np.save(_out_path(args, f"depth_{side}.npy"), depth.values.astype(np.float32))
        vis = depth.values.copy()
        ok = depth.validity
        if ok.any():
            lo, hi = vis[ok].min(), vis[ok].max()
            vis = np.where(ok, (vis - lo) / max(hi - lo, 1e-9), 0.0)
        save_png(_out_path(args, f"depth_{side}.png"), np.repeat(vis[:, :, None], 3, axis=2))
    print(f"wrote depth maps for pair {inter.pair_ids} to {args.output or '.'}")
    return 0


def cmd_export_ply(dataset, args) -> int:
    session = _session(args)
    inter = _pair_intermediates(dataset, args, session)
    out = _out_path(args, args.out)
    save_ply(inter.cloud, out, binary=not args.ascii)
    print(f"wrote {len(inter.cloud)} gaussians to {out}")
    return 0


def cmd_heatmaps(dataset, args) -> int:
    session = _session(args)
    inter = _pair_intermediates(dataset, args, session)
    paths = {}
    paths.update(emit_heatmaps(inter.maps_left, inter.depth_left, args.output or ".", prefix="left_"))
    paths.update(emit_heatmaps(inter.maps_right, inter.depth_right, args.output or ".", prefix="right_"))
    print("wrote " + ", ".join(str(p) for p in paths.values()))
    return 0


def cmd_bench(dataset, args) -> int:
    session = _session(args)
    poses = json.loads(Path(args.poses).read_text(encoding="utf-8"))
    requests = []
    for entry in poses:
        pose = CameraPose(
            rotation=np.asarray(entry["R"], dtype=np.float64).reshape(3, 3),
            translation=np.asarray(entry["t"], dtype=np.float64).reshape(3),
        )
        intr = intrinsics_from_fov(float(entry["fov_deg"]), int(entry["width"]), int(entry["height"]))
        requests.append(RenderRequest(frame=int(entry.get("frame", 0)), intrinsics=intr, pose=pose))
    report = benchmark(dataset, requests, repetitions=args.reps, session=session)
    out = _out_path(args, args.out)
    write_report(report, out)
    print(json.dumps(report, indent=2))
    return 0


def cmd_refine(dataset, args) -> int:
    session = _session(args)
    exclude = args.exclude.split(",") if args.exclude else ()
    req = RenderRequest(
        frame=args.frame,
        intrinsics=_load_pose_file(args.pose)[1],
        pose=_load_pose_file(args.pose)[0],
        refine_steps=args.steps,
        refine_lr=args.lr,
        exclude_cameras=tuple(exclude),
    )
    frame, report, timings = render_novel_view(dataset, req, session)
    out = _out_path(args, args.out)
    save_png(out, frame.color)
    inter = next(iter(session._cache.values()))
    if inter.refine_reports:
        from ..losses.lossfns import write_loss_trajectory

        write_loss_trajectory(inter.refine_reports, out.with_suffix(".csv"))
    print(f"refined pair {timings['pair']} for {args.steps} steps; wrote {out}")
    return 0


def cmd_serve(dataset, args) -> int:
    serve(dataset, bind=args.bind, static_dir=args.static, session_factory=lambda: _session(args))
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="splatstereo", description=__doc__,
                                     formatter_class=argparse.RawDescriptionHelpFormatter)
    parser.add_argument("--dataset", required=True, help="dataset root directory")
    parser.add_argument("--config", help="stereo config JSON")
    parser.add_argument("--output", help="output directory (default .)")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("render", help="render one novel view")
    p.add_argument("--frame", type=int, default=0)
    p.add_argument("--pose", required=True, help="pose JSON file")
    p.add_argument("--out", default="out.png")
    p.add_argument("--raw", action="store_true", help="also dump raw float32 planar")
    p.add_argument("--refine-steps", type=int, default=0)
    p.add_argument("--refine-lr", type=float, default=1.0)
    p.add_argument("--exclude", help="comma-separated camera ids to exclude from sourcing")
    p.set_defaults(func=cmd_render)

    p = sub.add_parser("depth", help="estimate depth for a source pair")
    p.add_argument("--frame", type=int, default=0)
    p.add_argument("--cameras", help="left,right camera ids")
    p.add_argument("--pose", help="pose file for automatic pair selection")
    p.set_defaults(func=cmd_depth)

    p = sub.add_parser("export-ply", help="export the fused Gaussian cloud")
    p.add_argument("--frame", type=int, default=0)
    p.add_argument("--cameras", help="left,right camera ids")
    p.add_argument("--pose", help="pose file for automatic pair selection")
    p.add_argument("--out", default="cloud.ply")
    p.add_argument("--ascii", action="store_true")
    p.set_defaults(func=cmd_export_ply)

    p = sub.add_parser("heatmaps", help="emit opacity/scale/depth heatmaps")
    p.add_argument("--frame", type=int, default=0)
    p.add_argument("--cameras", help="left,right camera ids")
    p.add_argument("--pose", help="pose file for automatic pair selection")
    p.set_defaults(func=cmd_heatmaps)

    p = sub.add_parser("bench", help="timing benchmark over a pose list")
    p.add_argument("--poses", required=True, help="JSON list of pose objects")
    p.add_argument("--reps", type=int, default=5)
    p.add_argument("--out", default="bench.json")
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("refine", help="refine the source pair against held-out views")
    p.add_argument("--frame", type=int, default=0)
    p.add_argument("--pose", required=True)
    p.add_argument("--steps", type=int, default=100)
    p.add_argument("--lr", type=float, default=1.0)
    p.add_argument("--out", default="refined.png")
    p.add_argument("--exclude", help="cameras excluded from sourcing (held out)")
    p.set_defaults(func=cmd_refine)

    p = sub.add_parser("serve", help="run the streaming render service")
    p.add_argument("--bind", default="127.0.0.1:8765")
    p.add_argument("--static", help="static viewer directory to serve at /")
    p.set_defaults(func=cmd_serve)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.INFO,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        dataset = load_dataset(args.dataset)
        return args.func(dataset, args)
    except SplatStereoError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    raise SystemExit(main())
