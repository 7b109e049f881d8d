"""
Camera calibration and rigid transforms.

Frame convention: a PoseSE3 ``T12`` maps camera-1 coordinates to camera-2
coordinates, ``X2 = R @ X1 + t``. Pose files store camera-to-world poses.
"""
from dataclasses import dataclass, field

import numpy as np

from ..exceptions import InvalidParameterError

ORTHONORMAL_TOL = 1e-9


@dataclass(frozen=True)
class Intrinsics:
    """Pinhole camera without skew; pixel centers sit at integer coordinates."""

    fx: float
    fy: float
    cx: float
    cy: float
    width: int
    height: int

    def __post_init__(self):
        if not (self.fx > 0 and self.fy > 0):
            raise InvalidParameterError(f"focal lengths must be positive (fx={self.fx}, fy={self.fy})")
        if self.width < 2 or self.height < 2:
            raise InvalidParameterError(f"image size must be at least 2x2 (got {self.width}x{self.height})")

    @property
    def shape(self):
        return (self.height, self.width)

    @property
    def matrix(self):
        return np.array([[self.fx, 0.0, self.cx],
                         [0.0, self.fy, self.cy],
                         [0.0, 0.0, 1.0]])

    def scaled(self, width, height):
        """Intrinsics for the same camera resampled to ``width``×``height``."""
        sx = width / self.width
        sy = height / self.height
        return Intrinsics(self.fx * sx, self.fy * sy, self.cx * sx, self.cy * sy, width, height)

    def to_dict(self):
        return {
            'fx': self.fx, 'fy': self.fy, 'cx': self.cx, 'cy': self.cy,
            'width': self.width, 'height': self.height,
        }


@dataclass(frozen=True)
class StereoRig:
    """Rectified stereo pair: left camera intrinsics plus baseline in meters."""

    intrinsics: Intrinsics
    baseline: float

    def __post_init__(self):
        if not self.baseline > 0:
            raise InvalidParameterError(f"baseline must be positive (got {self.baseline})")

    def to_dict(self):
        return {**self.intrinsics.to_dict(), 'baseline': self.baseline}


def nearest_rotation(matrix):
    """Project a 3×3 matrix onto SO(3) (closest rotation in Frobenius norm)."""
    u, _, vt = np.linalg.svd(matrix)
    d = np.sign(np.linalg.det(u @ vt))
    return u @ np.diag([1.0, 1.0, d]) @ vt


def orthonormality_error(rotation):
    return float(max(np.abs(rotation.T @ rotation - np.eye(3)).max(),
                     abs(np.linalg.det(rotation) - 1.0)))


@dataclass(frozen=True, eq=False)
class PoseSE3:
    """Rigid transform ``X' = rotation @ X + translation``."""

    rotation: np.ndarray = field(default_factory=lambda: np.eye(3))
    translation: np.ndarray = field(default_factory=lambda: np.zeros(3))

    def __post_init__(self):
        rotation = np.array(self.rotation, dtype=np.float64).reshape(3, 3)
        translation = np.array(self.translation, dtype=np.float64).reshape(3)
        if not (np.all(np.isfinite(rotation)) and np.all(np.isfinite(translation))):
            raise InvalidParameterError("pose entries must be finite")
        if orthonormality_error(rotation) > ORTHONORMAL_TOL:
            raise InvalidParameterError(
                f"rotation is not in SO(3) (error {orthonormality_error(rotation):.3g})")
        rotation.flags.writeable = False
        translation.flags.writeable = False
        object.__setattr__(self, 'rotation', rotation)
        object.__setattr__(self, 'translation', translation)

    @classmethod
    def identity(cls):
        return cls(np.eye(3), np.zeros(3))

    @classmethod
    def from_matrix(cls, matrix, tolerance=ORTHONORMAL_TOL):
        """
        Build a pose from a 3×4 or 4×4 matrix.

        Rotations within ``tolerance`` of SO(3) are snapped onto it, which is
        how text pose files with rounded entries are accepted.
        """
        matrix = np.asarray(matrix, dtype=np.float64)
        rotation = matrix[:3, :3]
        error = orthonormality_error(rotation)
        if error > tolerance:
            raise InvalidParameterError(f"rotation is not orthonormal (error {error:.3g})")
        if error > 0:
            rotation = nearest_rotation(rotation)
        return cls(rotation, matrix[:3, 3])

    @property
    def matrix(self):
        out = np.eye(4)
        out[:3, :3] = self.rotation
        out[:3, 3] = self.translation
        return out

    def inverse(self):
        rt = self.rotation.T
        return PoseSE3(rt, -rt @ self.translation)

    def apply(self, points):
        """Transform an (..., 3) array of points."""
        points = np.asarray(points, dtype=np.float64)
        return np.einsum('ij,...j->...i', self.rotation, points) + self.translation

    def rotation_angle(self):
        """Rotation angle in radians."""
        cos = (np.trace(self.rotation) - 1.0) / 2.0
        return float(np.arccos(np.clip(cos, -1.0, 1.0)))

    def to_dict(self):
        return {
            'rotation': self.rotation.tolist(),
            'translation': self.translation.tolist(),
        }

    def __eq__(self, other):
        if not isinstance(other, PoseSE3):
            return NotImplemented
        return (np.array_equal(self.rotation, other.rotation)
                and np.array_equal(self.translation, other.translation))
