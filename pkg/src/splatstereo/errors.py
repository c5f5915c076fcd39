"""Exception types shared across the package."""


class SplatStereoError(Exception):
    """Base class for all errors raised by this package."""


class InvalidInputError(SplatStereoError, ValueError):
    """An argument violates a documented precondition."""


class DegenerateGeometryError(SplatStereoError):
    """Camera geometry does not admit the requested operation (e.g. zero baseline)."""


class BehindCameraError(SplatStereoError):
    """A point lies at or behind the camera plane."""


class WeightLoadError(SplatStereoError):
    """A weights file is missing tensors or has mismatched shapes."""


class DatasetError(SplatStereoError):
    """A dataset directory is malformed or incomplete."""


class DivergenceError(SplatStereoError):
    """Iterative refinement diverged (loss exceeded the abort threshold)."""
