"""
Rigid Geometry Commands
=======================
    rigid-flow  rigid flow induced by depth and camera motion
    occlusion   non-occlusion mask from the reverse optical flow
    align       refine a pose by rigid point-cloud alignment
    segment     moving-region mask from optical vs rigid flow
"""
import logging
import os

from ..exceptions import check_same_shape
from ..models import SegmentationParams
from ..services.formats import read_depth, write_flow, write_json, write_mask, write_poses
from ..services.rigid_alignment import RigidAlignmentModule, rigid_flow
from ..services.segmentation import motion_mask
from ..services.warp import estimate_occlusion
from .common import (add_compression, add_output, load_calibration, load_depth, load_flow,
                     load_pose, success, visible_with_flow)

logger = logging.getLogger(__name__)


def cmd_rigid_flow(args):
    depth, k = load_depth(args.depth, args.disparity, args.calib)
    pose = load_pose(args.pose, args.frame)
    flow, validity = rigid_flow(depth, pose, k)
    write_flow(args.out, flow, validity, compression=args.compression)
    success(f"Rigid flow written to {args.out} ({validity.count()} valid pixels)")
    return 0


def cmd_occlusion(args):
    flow21, _ = load_flow(args.flow21)
    mask = estimate_occlusion(flow21, threshold=args.threshold)
    write_mask(args.out, mask, compression=args.compression)
    success(f"Non-occlusion mask written to {args.out} "
            f"({mask.count()} of {mask.values.size} pixels visible)")
    return 0


def report_path(out, report):
    if report:
        return report
    return os.path.splitext(os.fspath(out))[0] + '.json'


def cmd_align(args):
    k, _ = load_calibration(args.calib)
    depth1 = read_depth(args.depth1)
    depth2 = read_depth(args.depth2)
    check_same_shape(k.shape, depth1.shape, 'depth1 vs calibration', source=args.depth1)
    check_same_shape(k.shape, depth2.shape, 'depth2 vs calibration', source=args.depth2)
    flow, flow_valid = load_flow(args.flow, k.shape)
    non_occluded = visible_with_flow(args.occlusion, flow_valid)
    pose_init = load_pose(args.pose, args.frame)

    module = RigidAlignmentModule(region_fraction=args.region_fraction, iterations=args.iterations)
    result = module.refine(depth1, depth2, flow, pose_init, k, non_occluded)

    write_poses(args.out, [result.refined])
    report = report_path(args.out, args.report)
    write_json(report, {**result.to_dict(), 'region_fraction': args.region_fraction,
                        'iterations': args.iterations})
    if args.region_out:
        write_mask(args.region_out, result.region)
    success(f"Refined pose written to {args.out} "
            f"(rms {result.rms_before:.6f} m -> {result.rms_after:.6f} m, report {report})")
    return 0


def cmd_segment(args):
    flow_opt, opt_valid = load_flow(args.flow)
    flow_rig, rig_valid = load_flow(args.rigid_flow, flow_opt.shape)
    non_occluded = visible_with_flow(args.occlusion, opt_valid, rig_valid)
    mask = motion_mask(flow_opt, flow_rig, non_occluded, SegmentationParams(args.delta))
    write_mask(args.out, mask, compression=args.compression)
    success(f"Motion mask written to {args.out} ({mask.count()} moving pixels)")
    return 0


def _add_pose_arguments(parser):
    parser.add_argument('--pose', required=True, help='pose file: T12 or a camera-to-world trajectory')
    parser.add_argument('--frame', type=int, default=0, help='trajectory frame whose motion to use')


def register(subparsers, cfg):
    parser = subparsers.add_parser('rigid-flow', help='rigid flow from depth and camera motion')
    source = parser.add_mutually_exclusive_group(required=True)
    source.add_argument('--depth', help='frame-1 depth (PFM)')
    source.add_argument('--disparity', help='frame-1 left disparity (PFM); needs a baseline')
    _add_pose_arguments(parser)
    parser.add_argument('--calib', required=True, help='calibration "fx fy cx cy width height [baseline]"')
    add_output(parser, '16-bit flow PNG')
    add_compression(parser, cfg)
    parser.set_defaults(func=cmd_rigid_flow)

    parser = subparsers.add_parser('occlusion', help='non-occlusion mask from the reverse flow')
    parser.add_argument('--flow21', required=True, help='reverse optical flow (16-bit PNG)')
    parser.add_argument('--threshold', type=float, default=cfg.OCCLUSION_THRESHOLD,
                        help='coverage threshold (default %(default)s)')
    add_output(parser, 'mask PNG (255 = visible in frame 2)')
    add_compression(parser, cfg)
    parser.set_defaults(func=cmd_occlusion)

    parser = subparsers.add_parser('align', help='refine a pose by rigid point-cloud alignment')
    parser.add_argument('--depth1', required=True, help='frame-1 depth (PFM)')
    parser.add_argument('--depth2', required=True, help='frame-2 depth (PFM)')
    parser.add_argument('--flow', required=True, help='optical flow 1->2 (16-bit PNG)')
    parser.add_argument('--occlusion', help='non-occlusion mask PNG (default: all visible)')
    _add_pose_arguments(parser)
    parser.add_argument('--calib', required=True)
    parser.add_argument('--region-fraction', type=float, default=cfg.REGION_FRACTION)
    parser.add_argument('--iterations', type=int, default=cfg.ALIGN_ITERATIONS)
    add_output(parser, 'single-line refined pose file')
    parser.add_argument('--report', help='JSON report (default: next to --out)')
    parser.add_argument('--region-out', help='optional PNG of the alignment region')
    parser.set_defaults(func=cmd_align)

    parser = subparsers.add_parser('segment', help='moving-region mask from flow consistency')
    parser.add_argument('--flow', required=True, help='optical flow (16-bit PNG)')
    parser.add_argument('--rigid-flow', required=True, help='rigid flow (16-bit PNG)')
    parser.add_argument('--occlusion', help='non-occlusion mask PNG (default: all visible)')
    parser.add_argument('--delta', type=float, default=cfg.MOTION_DELTA,
                        help='flow difference threshold in pixels (default %(default)s)')
    add_output(parser, 'mask PNG (255 = moving)')
    add_compression(parser, cfg)
    parser.set_defaults(func=cmd_segment)
