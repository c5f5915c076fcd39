"""Dataset ingestion.

Layout on disk:
    root/calibration.json              camera rig (see geometry.calibration)
    root/images/<cam_id>/<frame>.png   frame index zero-padded to 6 digits
    root/depth/<cam_id>/<frame>.npy    optional ground-truth depth (meters)
    root/masks/<cam_id>/<frame>.png    optional foreground masks
Every frame must have an image for every rig camera, and image sizes must
match the calibration.
"""

import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from PIL import Image

from ..errors import DatasetError
from ..geometry.calibration import load_calibration
from ..geometry.camera import CameraRig
from ..imgio import load_image, load_mask

logger = logging.getLogger(__name__)


@dataclass
class SceneDataset:
    root: Path
    rig: CameraRig
    frames: list
    has_depth: bool = False
    has_masks: bool = False
    _image_cache: dict = field(default_factory=dict, repr=False)

    def image_path(self, camera_id, frame: int) -> Path:
        return self.root / "images" / str(camera_id) / f"{frame:06d}.png"

    def depth_path(self, camera_id, frame: int) -> Path:
        return self.root / "depth" / str(camera_id) / f"{frame:06d}.npy"

    def mask_path(self, camera_id, frame: int) -> Path:
        return self.root / "masks" / str(camera_id) / f"{frame:06d}.png"

    def load_image(self, camera_id, frame: int, cache: bool = True) -> np.ndarray:
        key = (camera_id, frame)
        if cache and key in self._image_cache:
            return self._image_cache[key]
        path = self.image_path(camera_id, frame)
        if not path.exists():
            raise DatasetError(f"missing image for camera {camera_id!r}, frame {frame}: {path}")
        img = load_image(path)
        intr, _ = self.rig.camera(camera_id)
        if img.shape[:2] != (intr.height, intr.width):
            raise DatasetError(
                f"camera {camera_id!r} frame {frame}: image is {img.shape[1]}x{img.shape[0]}, "
                f"calibration says {intr.width}x{intr.height}"
            )
        if cache:
            self._image_cache[key] = img
        return img

    def load_depth(self, camera_id, frame: int) -> np.ndarray | None:
        path = self.depth_path(camera_id, frame)
        return np.load(path).astype(np.float64) if path.exists() else None

    def load_mask(self, camera_id, frame: int) -> np.ndarray | None:
        path = self.mask_path(camera_id, frame)
        return load_mask(path) if path.exists() else None


def load_dataset(root) -> SceneDataset:
    """Validate and open a dataset directory.

    Frame ordering is deterministic (sorted numeric indices). Raises
    DatasetError naming the first missing camera/frame or the first size
    mismatch.
    """
    root = Path(root)
    calib = root / "calibration.json"
    if not calib.exists():
        raise DatasetError(f"no calibration.json under {root}")
    rig = load_calibration(calib)

    images_dir = root / "images"
    if not images_dir.is_dir():
        raise DatasetError(f"no images/ directory under {root}")
    frames = None
    for cid in rig.camera_ids:
        cam_dir = images_dir / str(cid)
        if not cam_dir.is_dir():
            raise DatasetError(f"missing image directory for camera {cid!r}")
        found = sorted(int(p.stem) for p in cam_dir.glob("*.png"))
        if frames is None:
            frames = found
        elif found != frames:
            missing = sorted(set(frames) ^ set(found))
            raise DatasetError(
                f"camera {cid!r} frame set differs from the rig's (first difference: frame {missing[0]})"
            )
    if not frames:
        raise DatasetError(f"dataset {root} contains no frames")

    ds = SceneDataset(
        root=root,
        rig=rig,
        frames=frames,
        has_depth=(root / "depth").is_dir(),
        has_masks=(root / "masks").is_dir(),
    )
    # cheap eager size check: PIL reads only headers
    for cid in rig.camera_ids:
        intr, _ = rig.camera(cid)
        with Image.open(ds.image_path(cid, frames[0])) as img:
            if img.size != (intr.width, intr.height):
                raise DatasetError(
                    f"camera {cid!r} frame {frames[0]}: image is {img.size[0]}x{img.size[1]}, "
                    f"calibration says {intr.width}x{intr.height}"
                )
    logger.info("loaded dataset %s: %d cameras, %d frames", root, len(rig.camera_ids), len(frames))
    return ds
