"""PLY export/import for Gaussian clouds.

Schema per vertex: x, y, z, red, green, blue (floats in [0, 1]), opacity,
scale_0..2, rot_0..3 (quaternion w, x, y, z). Binary files are
little-endian float32; an ASCII variant uses the same property order.
"""

import numpy as np

from ..errors import InvalidInputError
from .cloud import GaussianCloud

_PROPERTIES = (
    "x", "y", "z",
    "red", "green", "blue",
    "opacity",
    "scale_0", "scale_1", "scale_2",
    "rot_0", "rot_1", "rot_2", "rot_3",
)


def _cloud_to_rows(cloud: GaussianCloud) -> np.ndarray:
    return np.concatenate(
        [
            cloud.positions,
            cloud.colors,
            cloud.opacities[:, None],
            cloud.scales,
            cloud.rotations,
        ],
        axis=1,
    ).astype("<f4")


def _header(count: int, binary: bool) -> str:
    fmt = "binary_little_endian 1.0" if binary else "ascii 1.0"
    lines = ["ply", f"format {fmt}", f"element vertex {count}"]
    lines += [f"property float {name}" for name in _PROPERTIES]
    lines.append("end_header")
    return "\n".join(lines) + "\n"


def save_ply(cloud: GaussianCloud, path, binary: bool = True) -> None:
    rows = _cloud_to_rows(cloud)
    header = _header(len(rows), binary)
    with open(path, "wb") as fh:
        fh.write(header.encode("ascii"))
        if binary:
            fh.write(rows.tobytes())
        else:
            np.savetxt(fh, rows, fmt="%.9g")


def load_ply(path) -> GaussianCloud:
    with open(path, "rb") as fh:
        raw = fh.read()
    end = raw.find(b"end_header\n")
    if end < 0:
        raise InvalidInputError(f"{path}: not a PLY file (missing end_header)")
    header = raw[:end].decode("ascii", errors="replace").splitlines()
    body = raw[end + len(b"end_header\n"):]

    if not header or header[0].strip() != "ply":
        raise InvalidInputError(f"{path}: not a PLY file")
    binary = None
    count = None
    props = []
    for line in header[1:]:
        parts = line.split()
        if not parts:
            continue
        if parts[0] == "format":
            if parts[1] == "binary_little_endian":
                binary = True
            elif parts[1] == "ascii":
                binary = False
            else:
                raise InvalidInputError(f"unsupported PLY format {parts[1]!r}")
        elif parts[0] == "element" and parts[1] == "vertex":
            count = int(parts[2])
        elif parts[0] == "property":
            props.append(parts[2])
    if binary is None or count is None:
        raise InvalidInputError(f"{path}: malformed PLY header")
    if tuple(props) != _PROPERTIES:
        raise InvalidInputError(
            f"{path}: unexpected property order {props}, need {list(_PROPERTIES)}"
        )

    if binary:
        rows = np.frombuffer(body, dtype="<f4", count=count * len(_PROPERTIES))
        rows = rows.reshape(count, len(_PROPERTIES)).astype(np.float64)
    else:
        rows = np.loadtxt(body.decode("ascii").splitlines(), dtype=np.float64)
        rows = rows.reshape(count, len(_PROPERTIES))
    return GaussianCloud(
        positions=rows[:, 0:3],
        colors=rows[:, 3:6],
        opacities=rows[:, 6],
        scales=rows[:, 7:10],
        rotations=rows[:, 10:14],
    )
