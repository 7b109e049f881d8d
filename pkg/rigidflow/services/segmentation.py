"""
Segmentation Service - Motion Mask from Flow Consistency
========================================================
A non-occluded pixel is labelled moving when the optical flow and the
(refined) rigid flow disagree by more than ``delta`` pixels:

    M1 = [‖F_opt − F_rig'‖₂ > δ] ∧ O1
"""
import logging

from ..exceptions import check_same_shape
from ..models import FlowField, Mask, SegmentationParams
from .warp import flow_magnitude_diff

logger = logging.getLogger(__name__)


def motion_mask(f_opt: FlowField, f_rig: FlowField, non_occluded: Mask,
                params: SegmentationParams = None) -> Mask:
    """
    Moving-region mask M1; never fires inside the occluded area.

    Args:
        f_opt: optical flow (frame 1 to frame 2)
        f_rig: rigid flow from the refined pose
        non_occluded: O1
        params: threshold bundle; defaults to ``delta = 3`` px

    Returns:
        Mask M1 (strict inequality at the threshold)
    """
    params = params or SegmentationParams()
    check_same_shape(f_opt.shape, non_occluded.shape, 'flow vs occlusion mask', source='non_occluded')
    difference = flow_magnitude_diff(f_opt, f_rig)
    moving = (difference > params.delta) & non_occluded.values
    mask = Mask(moving)
    logger.debug(f"motion mask: {mask.count()} moving pixels at delta={params.delta}")
    return mask
