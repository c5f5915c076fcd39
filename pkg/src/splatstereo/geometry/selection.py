"""Novel-view-driven choice of the binocular source pair."""

import numpy as np

from ..errors import InvalidInputError
from .camera import CameraRig

_DEFAULT_UP = np.array([0.0, 1.0, 0.0])


def select_source_pair(rig: CameraRig, target_center: np.ndarray, up_axis=None) -> tuple:
    """Pick the two rig cameras best aligned with the target viewpoint.

    Alignment is the dot product of unit view vectors (camera center minus
    scene center vs. target center minus scene center); the two highest
    scores win. The pair is ordered so cross(V_left, V_right) points along
    the world up axis, forming a left-right stereo pair.

    Returns (left_id, right_id).
    """
    up = _DEFAULT_UP if up_axis is None else np.asarray(up_axis, dtype=np.float64)
    target = np.asarray(target_center, dtype=np.float64).reshape(3)
    v_tar = target - rig.scene_center
    norm = np.linalg.norm(v_tar)
    if norm < 1e-12:
        raise InvalidInputError("target viewpoint coincides with the scene center")
    v_tar = v_tar / norm

    ids = rig.camera_ids
    scores = []
    units = {}
    for cid in ids:
        v = rig.view_vector(cid)
        n = np.linalg.norm(v)
        if n < 1e-12:
            raise InvalidInputError(f"camera {cid!r} sits at the scene center")
        units[cid] = v / n
        scores.append(float(units[cid] @ v_tar))

    order = np.argsort(-np.asarray(scores), kind="stable")
    a, b = ids[order[0]], ids[order[1]]
    if float(np.cross(units[a], units[b]) @ up) >= 0.0:
        return a, b
    return b, a
