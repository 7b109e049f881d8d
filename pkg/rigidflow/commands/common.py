"""
Shared argument and input helpers for the sub-commands.
"""
import logging
import os

from ..exceptions import FormatError, InvalidParameterError, check_same_shape
from ..models import Mask, StereoRig
from ..services.formats import (read_calibration, read_depth, read_disparity, read_flow,
                                read_mask, read_poses)
from ..services.geometry import disparity_to_depth, relative_poses

logger = logging.getLogger(__name__)


def success(message):
    """Outcome line on stdout."""
    print(f"✅ {message}")


def load_calibration(path, need_baseline=False):
    k, baseline = read_calibration(path)
    if need_baseline and baseline is None:
        raise FormatError("calibration lacks the stereo baseline", source=os.fspath(path))
    return k, baseline


def load_rig(path):
    k, baseline = load_calibration(path, need_baseline=True)
    return StereoRig(k, baseline)


def load_pose(path, frame=0):
    """
    Relative pose T12 from a pose file.

    A single-line file holds T12 itself; a longer file is a camera-to-world
    trajectory and the pose from ``frame`` to ``frame + 1`` is returned.
    """
    poses = read_poses(path)
    if len(poses) == 1:
        if frame != 0:
            raise InvalidParameterError(f"frame {frame} requested from a single-pose file",
                                        source=os.fspath(path))
        return poses[0]
    relative = relative_poses(poses)
    if not 0 <= frame < len(relative):
        raise InvalidParameterError(f"frame {frame} outside the trajectory (0..{len(relative) - 1})",
                                    source=os.fspath(path))
    return relative[frame]


def load_depth(depth_path, disparity_path, calib_path):
    """Depth from a depth PFM, or from a disparity PFM and the rig baseline."""
    if depth_path:
        k, _ = load_calibration(calib_path)
        depth = read_depth(depth_path)
        check_same_shape(k.shape, depth.shape, 'depth vs calibration', source=os.fspath(depth_path))
        return depth, k
    if not disparity_path:
        raise InvalidParameterError("either --depth or --disparity is required")
    rig = load_rig(calib_path)
    disparity = read_disparity(disparity_path)
    check_same_shape(rig.intrinsics.shape, disparity.shape, 'disparity vs calibration',
                     source=os.fspath(disparity_path))
    return disparity_to_depth(disparity, rig), rig.intrinsics


def load_flow(path, shape=None):
    flow, validity = read_flow(path)
    if shape is not None:
        check_same_shape(shape, flow.shape, 'flow vs calibration', source=os.fspath(path))
    return flow, validity


def load_optional_mask(path, shape, default=True):
    """Mask from ``path`` or a constant mask when no path is given."""
    if not path:
        return Mask.full(shape[0], shape[1], default)
    mask = read_mask(path)
    check_same_shape(shape, mask.shape, 'mask', source=os.fspath(path))
    return mask


def visible_with_flow(mask_path, *validities: Mask) -> Mask:
    """
    Non-occlusion mask from ``mask_path`` (all visible when omitted) restricted
    to pixels where every given flow decoded as valid.
    """
    shape = validities[0].shape
    mask = load_optional_mask(mask_path, shape)
    values = mask.values.copy()
    for validity in validities:
        check_same_shape(shape, validity.shape, 'flow validity', source='flow')
        values &= validity.values
    dropped = mask.count() - int(values.sum())
    if dropped:
        logger.info(f"{dropped} pixels without valid flow treated as occluded")
    return Mask(values)


def add_output(parser, help_text):
    parser.add_argument('--out', required=True, help=help_text)


def add_compression(parser, cfg):
    parser.add_argument('--compression', type=int, default=cfg.PNG_COMPRESSION,
                        help='PNG compression level 0-9 (default %(default)s)')
