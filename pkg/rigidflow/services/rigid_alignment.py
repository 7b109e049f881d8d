"""
Rigid Alignment Service - Rigid Flow & Ego-Motion Refinement
============================================================
Synthesizes the flow induced by camera motion over a static scene and
refines an initial pose by aligning two corresponded point clouds:

    Q̂1 = T12 · Q1                (frame-1 points moved by the initial pose)
    Q̃1 = warp(Q2, F12)           (frame-2 points pulled back along the flow)
    ΔT = argmin Σ_R ‖ΔT·Q̂1 − Q̃1‖²   (closed form, SVD)
    T'12 = ΔT × T12

Region R is the fraction (25 %) of non-occluded, valid pixels with the
smallest ‖Q̂1 − Q̃1‖, which keeps independently moving objects out.
"""
import logging

import numpy as np

from ..exceptions import (EmptyRegionError, InvalidParameterError,
                          SingularConfigurationError, check_same_shape)
from ..models import (AlignmentResult, DepthMap, FlowField, Intrinsics, Mask,
                      PointCloud, PoseSE3)
from .geometry import backproject, compose, pixel_grid, project, transform
from .warp import warp_cloud

logger = logging.getLogger(__name__)

DEFAULT_REGION_FRACTION = 0.25
MIN_REGION_POINTS = 3
RANK_TOLERANCE = 1e-12


def rigid_flow(depth1: DepthMap, pose: PoseSE3, k: Intrinsics):
    """
    Flow induced by ``pose`` on the static scene seen in ``depth1``:
    ``F = project(T · backproject(D1)) − P1``.

    Returns:
        (FlowField, validity Mask); invalid pixels carry zero flow.
    """
    check_same_shape(k.shape, depth1.shape, 'depth vs intrinsics', source='depth1')
    moved = transform(backproject(depth1, k), pose)
    coords, validity = project(moved, k)
    xs, ys = pixel_grid(*k.shape)
    uv = np.stack([coords[..., 0] - xs, coords[..., 1] - ys], axis=2)
    uv = np.where(validity[..., None], uv, 0.0)
    return FlowField(uv), Mask(validity)


def point_residuals(q_hat: PointCloud, q_tilde: PointCloud) -> np.ndarray:
    """Per-pixel ‖q̂ − q̃‖ (meters)."""
    diff = q_hat.points - q_tilde.points
    return np.sqrt(np.einsum('hwi,hwi->hw', diff, diff))


def select_region(q_hat: PointCloud, q_tilde: PointCloud, non_occluded: Mask,
                  fraction=DEFAULT_REGION_FRACTION) -> Mask:
    """
    Pick the ``round(fraction · N)`` eligible pixels with the smallest
    point residual; ties are broken in raster-scan order.

    Raises:
        EmptyRegionError: no pixel is non-occluded and valid in both clouds.
    """
    check_same_shape(q_hat.shape, q_tilde.shape, 'q_hat vs q_tilde', source='q_tilde')
    check_same_shape(q_hat.shape, non_occluded.shape, 'cloud vs occlusion mask', source='non_occluded')
    if not 0 < fraction <= 1:
        raise InvalidParameterError(f"region fraction must lie in (0, 1] (got {fraction})")

    eligible = non_occluded.values & q_hat.validity & q_tilde.validity
    candidates = np.flatnonzero(eligible)
    if candidates.size == 0:
        raise EmptyRegionError("no non-occluded pixel is valid in both point clouds", source='non_occluded')

    count = int(np.floor(fraction * candidates.size + 0.5))
    residuals = point_residuals(q_hat, q_tilde).reshape(-1)[candidates]
    chosen = candidates[np.argsort(residuals, kind='stable')[:count]]

    region = np.zeros(eligible.size, dtype=bool)
    region[chosen] = True
    return Mask(region.reshape(eligible.shape))


def align_svd(q_hat: PointCloud, q_tilde: PointCloud, region: Mask) -> PoseSE3:
    """
    Closed-form least-squares rigid transform taking q̂ onto q̃ over ``region``.

    The reflection case is excluded by the determinant correction, so the
    result is always a proper rotation.

    Raises:
        SingularConfigurationError: fewer than 3 points or collinear points.
    """
    check_same_shape(q_hat.shape, region.shape, 'cloud vs region', source='region')
    index = np.flatnonzero(region.values)
    if index.size < MIN_REGION_POINTS:
        raise SingularConfigurationError(
            f"alignment region has {index.size} points; at least {MIN_REGION_POINTS} are required",
            source='region')

    source = q_hat.points.reshape(-1, 3)[index]
    target = q_tilde.points.reshape(-1, 3)[index]
    mu_source = source.mean(axis=0)
    mu_target = target.mean(axis=0)

    # fixed-order fold, no BLAS threading
    covariance = np.einsum('ni,nj->ij', source - mu_source, target - mu_target)
    u, s, vt = np.linalg.svd(covariance)
    if s[0] <= 0 or s[1] <= RANK_TOLERANCE * s[0]:
        raise SingularConfigurationError("alignment region is degenerate (covariance rank < 2)",
                                         source='region')

    v = vt.T
    d = 1.0 if np.linalg.det(v @ u.T) >= 0 else -1.0
    rotation = v @ np.diag([1.0, 1.0, d]) @ u.T
    translation = mu_target - rotation @ mu_source
    return PoseSE3(rotation, translation)


def alignment_rms(q_hat: PointCloud, q_tilde: PointCloud, region: Mask, pose: PoseSE3 = None) -> float:
    """RMS of ‖pose·q̂ − q̃‖ over the region (identity pose when omitted)."""
    index = np.flatnonzero(region.values)
    if index.size == 0:
        return 0.0
    source = q_hat.points.reshape(-1, 3)[index]
    if pose is not None:
        source = pose.apply(source)
    diff = source - q_tilde.points.reshape(-1, 3)[index]
    return float(np.sqrt(np.einsum('ni,ni->', diff, diff) / index.size))


class RigidAlignmentModule:
    """
    Refines a pose estimate from depth and optical flow.

    The default is a single pass (select region once, align once); more
    iterations re-select the region with the refined pose.
    """

    def __init__(self, region_fraction=DEFAULT_REGION_FRACTION, iterations=1):
        if iterations < 1:
            raise InvalidParameterError(f"iterations must be at least 1 (got {iterations})")
        self.region_fraction = region_fraction
        self.iterations = iterations

    def refine(self, depth1: DepthMap, depth2: DepthMap, flow12: FlowField,
               pose_init: PoseSE3, k: Intrinsics, non_occluded: Mask) -> AlignmentResult:
        check_same_shape(k.shape, depth1.shape, 'depth1 vs intrinsics', source='depth1')
        check_same_shape(k.shape, depth2.shape, 'depth2 vs intrinsics', source='depth2')
        check_same_shape(k.shape, flow12.shape, 'flow vs intrinsics', source='flow12')
        check_same_shape(k.shape, non_occluded.shape, 'occlusion vs intrinsics', source='non_occluded')

        q1 = backproject(depth1, k)
        q_tilde = warp_cloud(backproject(depth2, k), flow12)

        pose = pose_init
        region = None
        eligible = 0
        for iteration in range(self.iterations):
            q_hat = transform(q1, pose)
            region = select_region(q_hat, q_tilde, non_occluded, self.region_fraction)
            eligible = int((non_occluded.values & q_hat.validity & q_tilde.validity).sum())
            delta = align_svd(q_hat, q_tilde, region)
            pose = compose(delta, pose)
            logger.debug(f"alignment pass {iteration + 1}: region {region.count()} of {eligible} pixels")

        q_init = transform(q1, pose_init)
        rms_before = alignment_rms(q_init, q_tilde, region)
        rms_after = alignment_rms(transform(q1, pose), q_tilde, region)
        total_delta = compose(pose, pose_init.inverse())
        logger.info(f"rigid alignment: rms {rms_before:.6f} m -> {rms_after:.6f} m "
                    f"over {region.count()} pixels")
        return AlignmentResult(
            delta=total_delta,
            refined=pose,
            region=region,
            rms_before=rms_before,
            rms_after=rms_after,
            eligible_count=eligible,
        )


def refine_pose(depth1: DepthMap, depth2: DepthMap, flow12: FlowField, pose_init: PoseSE3,
                k: Intrinsics, non_occluded: Mask, region_fraction=DEFAULT_REGION_FRACTION,
                iterations=1) -> AlignmentResult:
    """Single-call form of :meth:`RigidAlignmentModule.refine`."""
    module = RigidAlignmentModule(region_fraction=region_fraction, iterations=iterations)
    return module.refine(depth1, depth2, flow12, pose_init, k, non_occluded)
