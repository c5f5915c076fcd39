"""Calibration file I/O.

Schema (JSON): top-level {"scene_center": [3 floats], "cameras": [...]},
each camera {"id": str, "width": int, "height": int, "K": 9 floats
row-major, "R": 9 floats row-major world->camera, "t": 3 floats,
"model": "pinhole"}.
"""

import json
from pathlib import Path

import numpy as np

from ..errors import InvalidInputError
from .camera import CameraIntrinsics, CameraPose, CameraRig


def rig_from_dict(data: dict) -> CameraRig:
    if "cameras" not in data:
        raise InvalidInputError("calibration is missing the 'cameras' array")
    cameras = []
    for entry in data["cameras"]:
        try:
            model = entry.get("model", "pinhole")
            if model != "pinhole":
                raise InvalidInputError(f"unsupported camera model {model!r}")
            intr = CameraIntrinsics.from_K(entry["K"], entry["width"], entry["height"])
            pose = CameraPose(
                rotation=np.asarray(entry["R"], dtype=np.float64).reshape(3, 3),
                translation=np.asarray(entry["t"], dtype=np.float64).reshape(3),
            )
            cameras.append((entry["id"], intr, pose))
        except KeyError as exc:
            raise InvalidInputError(f"camera entry missing field {exc}") from exc
    center = np.asarray(data.get("scene_center", [0.0, 0.0, 0.0]), dtype=np.float64)
    return CameraRig(cameras=tuple(cameras), scene_center=center)


def rig_to_dict(rig: CameraRig) -> dict:
    cameras = []
    for cid, intr, pose in rig.cameras:
        cameras.append(
            {
                "id": cid,
                "width": intr.width,
                "height": intr.height,
                "K": [float(x) for x in intr.K.reshape(-1)],
                "R": [float(x) for x in pose.rotation.reshape(-1)],
                "t": [float(x) for x in pose.translation],
                "model": "pinhole",
            }
        )
    return {"scene_center": [float(x) for x in rig.scene_center], "cameras": cameras}


def load_calibration(path) -> CameraRig:
    with open(Path(path), "r", encoding="utf-8") as fh:
        return rig_from_dict(json.load(fh))


def save_calibration(rig: CameraRig, path) -> None:
    with open(Path(path), "w", encoding="utf-8") as fh:
        json.dump(rig_to_dict(rig), fh, indent=2)
