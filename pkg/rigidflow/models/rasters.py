"""
Dense per-pixel rasters.

All rasters are float64 numpy arrays indexed ``[row, column]`` (y, x). Each
type carries a boolean validity raster where the quantity can be undefined.
"""
from dataclasses import dataclass

import numpy as np

from ..exceptions import InvalidParameterError, check_same_shape

IMAGE_RANGE_TOL = 1e-9


def _as_float(values, ndim, what):
    values = np.asarray(values, dtype=np.float64)
    if values.ndim != ndim:
        raise InvalidParameterError(f"{what} must have {ndim} dimensions (got shape {values.shape})")
    return values


def _as_validity(validity, shape):
    if validity is None:
        return np.ones(shape, dtype=bool)
    validity = np.asarray(validity, dtype=bool)
    check_same_shape(shape, validity.shape, 'validity')
    return validity


@dataclass(frozen=True, eq=False)
class DepthMap:
    """Metric depth along the optical axis (Z), meters."""

    values: np.ndarray
    validity: np.ndarray = None

    def __post_init__(self):
        values = _as_float(self.values, 2, 'depth')
        validity = _as_validity(self.validity, values.shape)
        with np.errstate(invalid='ignore'):
            validity = validity & np.isfinite(values) & (values > 0)
        object.__setattr__(self, 'values', values)
        object.__setattr__(self, 'validity', validity)

    @property
    def shape(self):
        return self.values.shape


@dataclass(frozen=True, eq=False)
class DisparityMap:
    """Horizontal stereo disparity in pixels; valid entries lie in (0, width)."""

    values: np.ndarray
    validity: np.ndarray = None

    def __post_init__(self):
        values = _as_float(self.values, 2, 'disparity')
        validity = _as_validity(self.validity, values.shape)
        with np.errstate(invalid='ignore'):
            validity = validity & np.isfinite(values) & (values > 0) & (values < values.shape[1])
        object.__setattr__(self, 'values', values)
        object.__setattr__(self, 'validity', validity)

    @property
    def shape(self):
        return self.values.shape


@dataclass(frozen=True, eq=False)
class PointCloud:
    """Organized point cloud: one camera-frame 3-D point per pixel."""

    points: np.ndarray
    validity: np.ndarray = None

    def __post_init__(self):
        points = _as_float(self.points, 3, 'points')
        if points.shape[2] != 3:
            raise InvalidParameterError(f"points must be H×W×3 (got {points.shape})")
        validity = _as_validity(self.validity, points.shape[:2])
        validity = validity & np.all(np.isfinite(points), axis=2)
        object.__setattr__(self, 'points', points)
        object.__setattr__(self, 'validity', validity)

    @property
    def shape(self):
        return self.points.shape[:2]


@dataclass(frozen=True, eq=False)
class FlowField:
    """Per-pixel displacement (u along x, v along y) from frame 1 to frame 2."""

    uv: np.ndarray

    def __post_init__(self):
        uv = _as_float(self.uv, 3, 'flow')
        if uv.shape[2] != 2:
            raise InvalidParameterError(f"flow must be H×W×2 (got {uv.shape})")
        if not np.all(np.isfinite(uv)):
            raise InvalidParameterError("flow entries must be finite")
        object.__setattr__(self, 'uv', uv)

    @classmethod
    def from_components(cls, u, v):
        return cls(np.stack([u, v], axis=2))

    @classmethod
    def zeros(cls, height, width):
        return cls(np.zeros((height, width, 2)))

    @property
    def u(self):
        return self.uv[..., 0]

    @property
    def v(self):
        return self.uv[..., 1]

    @property
    def shape(self):
        return self.uv.shape[:2]


@dataclass(frozen=True, eq=False)
class Image:
    """H×W×C raster with values in [0, 1]."""

    channels: np.ndarray

    def __post_init__(self):
        channels = np.asarray(self.channels, dtype=np.float64)
        if channels.ndim == 2:
            channels = channels[..., None]
        if channels.ndim != 3:
            raise InvalidParameterError(f"image must be H×W×C (got {channels.shape})")
        if channels.size and (channels.min() < -IMAGE_RANGE_TOL or channels.max() > 1 + IMAGE_RANGE_TOL):
            raise InvalidParameterError("image values must lie in [0, 1]")
        object.__setattr__(self, 'channels', np.clip(channels, 0.0, 1.0))

    @property
    def shape(self):
        return self.channels.shape[:2]

    @property
    def num_channels(self):
        return self.channels.shape[2]


@dataclass(frozen=True, eq=False)
class Mask:
    """Binary raster stored as bool."""

    values: np.ndarray

    def __post_init__(self):
        values = np.asarray(self.values)
        if values.ndim != 2:
            raise InvalidParameterError(f"mask must be H×W (got {values.shape})")
        if values.dtype != bool:
            if not np.all((values == 0) | (values == 1)):
                raise InvalidParameterError("mask values must be 0 or 1")
            values = values.astype(bool)
        object.__setattr__(self, 'values', values)

    @classmethod
    def full(cls, height, width, value=True):
        return cls(np.full((height, width), bool(value)))

    @property
    def shape(self):
        return self.values.shape

    def count(self):
        return int(self.values.sum())

    def as_float(self):
        return self.values.astype(np.float64)
