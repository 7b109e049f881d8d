"""
Synthetic scene description and the rendered ground-truth bundle.
Geometry is expressed in camera-1 coordinates at time t1 (x right, y down,
z forward).
"""
from dataclasses import dataclass, field
from typing import Tuple

import numpy as np

from ..exceptions import InvalidParameterError
from .camera import Intrinsics, PoseSE3, StereoRig
from .rasters import DepthMap, FlowField, Image, Mask


@dataclass(frozen=True, eq=False)
class PlaneSpec:
    """Static textured plane ``normal · X = offset`` (unit normal, offset > 0)."""

    normal: np.ndarray
    offset: float
    texture_seed: int = 0

    def __post_init__(self):
        normal = np.asarray(self.normal, dtype=np.float64).reshape(3)
        length = np.linalg.norm(normal)
        if not length > 0:
            raise InvalidParameterError("plane normal must be non-zero")
        offset = float(self.offset) / length
        if not offset > 0:
            raise InvalidParameterError("plane must lie in front of the first camera (offset > 0)")
        object.__setattr__(self, 'normal', normal / length)
        object.__setattr__(self, 'offset', offset)


@dataclass(frozen=True, eq=False)
class ObjectSpec:
    """
    Fronto-parallel textured rectangle covering ``footprint`` pixels of the
    first left image at depth ``depth``, moved by ``motion`` between t1 and t2.

    ``footprint`` is ``(x0, y0, x1, y1)`` pixel indices, half-open, so the
    rectangle's edges fall on half-pixel boundaries.
    """

    footprint: Tuple[int, int, int, int]
    depth: float
    motion: PoseSE3 = field(default_factory=PoseSE3.identity)
    texture_seed: int = 0

    def __post_init__(self):
        x0, y0, x1, y1 = (int(v) for v in self.footprint)
        if x1 <= x0 or y1 <= y0:
            raise InvalidParameterError(f"empty object footprint {self.footprint}")
        if not self.depth > 0:
            raise InvalidParameterError("object depth must be positive")
        object.__setattr__(self, 'footprint', (x0, y0, x1, y1))

    @property
    def is_moving(self):
        return not (np.allclose(self.motion.rotation, np.eye(3), atol=0, rtol=0)
                    and not np.any(self.motion.translation))

    def corners(self, k: Intrinsics):
        """3-D rectangle at t1: (origin, edge_u, edge_v) in camera-1 coordinates."""
        x0, y0, x1, y1 = self.footprint
        z = self.depth
        left = z * (x0 - 0.5 - k.cx) / k.fx
        right = z * (x1 - 0.5 - k.cx) / k.fx
        top = z * (y0 - 0.5 - k.cy) / k.fy
        bottom = z * (y1 - 0.5 - k.cy) / k.fy
        origin = np.array([left, top, z])
        return origin, np.array([right - left, 0.0, 0.0]), np.array([0.0, bottom - top, 0.0])


@dataclass(frozen=True, eq=False)
class SceneConfig:
    """Everything needed to render two stereo pairs deterministically."""

    intrinsics: Intrinsics
    baseline: float
    camera_motion: PoseSE3
    planes: Tuple[PlaneSpec, ...]
    objects: Tuple[ObjectSpec, ...] = ()
    texture_frequency: float = 1.0
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, 'planes', tuple(self.planes))
        object.__setattr__(self, 'objects', tuple(self.objects))
        if not self.baseline > 0:
            raise InvalidParameterError("baseline must be positive")
        if not self.planes:
            raise InvalidParameterError("scene needs at least one background plane")
        if not self.texture_frequency > 0:
            raise InvalidParameterError("texture_frequency must be positive")
        # camera centres at t1/t2, left and right, in camera-1 coordinates
        centre2 = self.camera_motion.inverse().translation
        centres = [np.zeros(3), centre2,
                   np.array([self.baseline, 0.0, 0.0]),
                   centre2 + self.camera_motion.rotation.T @ np.array([self.baseline, 0.0, 0.0])]
        for plane in self.planes:
            for centre in centres:
                if plane.normal @ centre >= plane.offset:
                    raise InvalidParameterError("every plane must lie in front of all four cameras")

    @property
    def rig(self):
        return StereoRig(self.intrinsics, self.baseline)


@dataclass(frozen=True, eq=False)
class SceneSample:
    """
    Rendered stereo-video bundle with exact ground truth.

    ``occlusion1`` follows the O1 convention: 1 where the frame-1 pixel is
    visible in frame 2. ``moving1`` marks pixels on independently moving
    objects. ``depth1_right`` is the depth seen by the right camera at t1.
    """

    l1: Image
    r1: Image
    l2: Image
    r2: Image
    depth1: DepthMap
    depth2: DepthMap
    flow12: FlowField
    flow21: FlowField
    rigid12: FlowField
    occlusion1: Mask
    moving1: Mask
    camera_motion: PoseSE3
    rig: StereoRig
    depth1_right: DepthMap = None

    @property
    def intrinsics(self):
        return self.rig.intrinsics
