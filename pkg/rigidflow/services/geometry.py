"""
Geometry Service - Pinhole Camera & SE(3) Operations
====================================================
Back-projection, projection, rigid transforms, pose composition,
disparity/depth conversion and the 6-dof pose parametrization.

Pixel convention: zero-based, x = column index, y = row index, pixel centers
at integer coordinates.
"""
import logging

import numpy as np
from scipy.spatial.transform import Rotation

from ..exceptions import InvalidParameterError, check_same_shape
from ..models import (DepthMap, DisparityMap, Intrinsics, PointCloud, PoseSE3,
                      StereoRig, nearest_rotation)
from ..models.camera import ORTHONORMAL_TOL, orthonormality_error

logger = logging.getLogger(__name__)

MIN_DEPTH = 1e-6


def pixel_grid(height, width):
    """Return (xs, ys) float rasters of pixel-center coordinates."""
    ys, xs = np.mgrid[0:height, 0:width].astype(np.float64)
    return xs, ys


def backproject(depth: DepthMap, k: Intrinsics) -> PointCloud:
    """
    Lift every valid depth pixel to its camera-frame 3-D point,
    ``Q = D · K⁻¹ · (x, y, 1)ᵀ``.
    """
    check_same_shape(k.shape, depth.shape, 'depth vs intrinsics', source='depth')
    xs, ys = pixel_grid(*k.shape)
    z = np.where(depth.validity, depth.values, 0.0)
    points = np.stack([z * (xs - k.cx) / k.fx, z * (ys - k.cy) / k.fy, z], axis=2)
    return PointCloud(points, depth.validity)


def project(cloud: PointCloud, k: Intrinsics):
    """
    Perspective projection of an organized cloud.

    Returns:
        (coords, validity): H×W×2 pixel coordinates (x, y) and a bool raster;
        points with Z ≤ 1e-6 m or invalid input points are flagged invalid and
        get coordinates (0, 0).
    """
    points = cloud.points
    z = points[..., 2]
    validity = cloud.validity & (z > MIN_DEPTH)
    safe_z = np.where(validity, z, 1.0)
    u = np.where(validity, k.fx * points[..., 0] / safe_z + k.cx, 0.0)
    v = np.where(validity, k.fy * points[..., 1] / safe_z + k.cy, 0.0)
    return np.stack([u, v], axis=2), validity


def transform(cloud: PointCloud, pose: PoseSE3) -> PointCloud:
    """Apply ``R·X + t`` to every point; validity is preserved."""
    return PointCloud(pose.apply(cloud.points), cloud.validity)


def compose(a: PoseSE3, b: PoseSE3) -> PoseSE3:
    """Pose that applies ``b`` first, then ``a`` (``a × b``)."""
    rotation = a.rotation @ b.rotation
    translation = a.rotation @ b.translation + a.translation
    if orthonormality_error(rotation) > ORTHONORMAL_TOL:
        logger.debug("re-orthonormalizing composed rotation")
        rotation = nearest_rotation(rotation)
    return PoseSE3(rotation, translation)


def disparity_to_depth(disp: DisparityMap, rig: StereoRig) -> DepthMap:
    """``D = B · fx / d`` on valid pixels; everything else becomes invalid."""
    check_same_shape(rig.intrinsics.shape, disp.shape, 'disparity vs intrinsics', source='disparity')
    safe = np.where(disp.validity, disp.values, 1.0)
    values = np.where(disp.validity, rig.baseline * rig.intrinsics.fx / safe, 0.0)
    return DepthMap(values, disp.validity)


def depth_to_disparity(depth: DepthMap, rig: StereoRig) -> DisparityMap:
    """Inverse of :func:`disparity_to_depth`."""
    check_same_shape(rig.intrinsics.shape, depth.shape, 'depth vs intrinsics', source='depth')
    safe = np.where(depth.validity, depth.values, 1.0)
    values = np.where(depth.validity, rig.baseline * rig.intrinsics.fx / safe, 0.0)
    return DisparityMap(values, depth.validity)


def pose_from_6dof(params) -> PoseSE3:
    """
    Build a pose from ``(tx, ty, tz, rx, ry, rz)``; the rotation part is an
    axis-angle vector in radians, the translation is taken as is.
    """
    params = np.asarray(params, dtype=np.float64).reshape(-1)
    if params.shape != (6,):
        raise InvalidParameterError(f"pose vector needs 6 entries (got {params.size})")
    rotation = Rotation.from_rotvec(params[3:]).as_matrix()
    return PoseSE3(rotation, params[:3])


def pose_to_6dof(pose: PoseSE3) -> np.ndarray:
    """Logarithm inverse of :func:`pose_from_6dof`."""
    rotvec = Rotation.from_matrix(pose.rotation).as_rotvec()
    return np.concatenate([pose.translation, rotvec])


def skew(vector):
    x, y, z = vector
    return np.array([[0.0, -z, y], [z, 0.0, -x], [-y, x, 0.0]])


def so3_right_jacobian(rotvec):
    """
    Right Jacobian of SO(3): ``exp(ω + dω) ≈ exp(ω) · exp(J_r(ω) dω)``.
    """
    rotvec = np.asarray(rotvec, dtype=np.float64)
    theta = np.linalg.norm(rotvec)
    w = skew(rotvec)
    if theta < 1e-8:
        return np.eye(3) - 0.5 * w + (w @ w) / 6.0
    return (np.eye(3)
            - (1.0 - np.cos(theta)) / theta ** 2 * w
            + (theta - np.sin(theta)) / theta ** 3 * (w @ w))


def relative_poses(trajectory):
    """
    Frame-to-frame motions of a camera-to-world trajectory:
    ``T_{k,k+1} = C_{k+1}⁻¹ · C_k`` maps frame-k coordinates to frame k+1.
    """
    return [compose(trajectory[i + 1].inverse(), trajectory[i]) for i in range(len(trajectory) - 1)]


def accumulate_poses(relative, start: PoseSE3 = None):
    """Inverse of :func:`relative_poses`: ``C_{k+1} = C_k · T_{k,k+1}⁻¹``."""
    trajectory = [start or PoseSE3.identity()]
    for motion in relative:
        trajectory.append(compose(trajectory[-1], motion.inverse()))
    return trajectory
