"""
Loss Commands
=============
    loss  evaluate the self-supervised loss suite on one sample
"""
import logging

from ..models import LossWeights
from ..services.formats import read_disparity, read_image, write_json
from ..services.gradients import GradientEngine
from ..services.losses import STAGES, LossEvaluator, LossInputs
from .common import (add_output, load_flow, load_optional_mask, load_pose, load_rig, success,
                     visible_with_flow)

logger = logging.getLogger(__name__)


def build_inputs(args) -> LossInputs:
    rig = load_rig(args.calib)
    shape = rig.intrinsics.shape
    flow_opt, flow_valid = load_flow(args.flow, shape)
    moving = load_optional_mask(args.moving, shape) if args.moving else None
    non_occluded = visible_with_flow(args.occlusion, flow_valid)
    pose_refined = load_pose(args.pose_refined) if args.pose_refined else None
    return LossInputs(
        l1=read_image(args.l1),
        l2=read_image(args.l2),
        r1=read_image(args.r1),
        flow_opt=flow_opt,
        disp_left=read_disparity(args.disp_left),
        disp_right=read_disparity(args.disp_right),
        pose=load_pose(args.pose, args.frame),
        rig=rig,
        non_occluded=non_occluded,
        moving=moving,
        pose_refined=pose_refined,
    )


def gradient_norms(inputs, weights):
    """Loss value and gradient norm for every differentiable (loss, input) pair."""
    engine = GradientEngine(inputs, weights)
    norms = {}
    for loss, wrt in GradientEngine.supported_pairs():
        bundle = engine.compute(loss, wrt)
        norms[f"{loss}/{wrt}"] = {'value': bundle.value, 'norm': bundle.norm()}
    return norms


def cmd_loss(args, cfg):
    weights = LossWeights.from_config(
        cfg,
        lambda_sm=args.lambda_sm,
        lambda_st=args.lambda_st,
        lambda_rig=args.lambda_rig,
        lambda_con=args.lambda_con,
        alpha=args.alpha,
        beta=args.beta,
        delta=args.delta,
    )
    inputs = build_inputs(args)
    report = LossEvaluator(weights).evaluate(inputs, stage=args.stage)
    payload = report.to_dict()
    payload['weights'] = {
        'lambda_sm': weights.lambda_sm, 'lambda_st': weights.lambda_st,
        'lambda_rig': weights.lambda_rig, 'lambda_con': weights.lambda_con,
        'alpha': weights.alpha, 'beta': weights.beta, 'delta': weights.delta,
    }
    if args.gradients:
        payload['gradients'] = gradient_norms(inputs, weights)
    write_json(args.out, payload)
    for name in report.empty_support:
        print(f"⚠️ {name} has no supporting pixels and was reported as 0")
    success(f"Stage {args.stage} loss {report.total:.6f} written to {args.out}")
    return 0


def register(subparsers, cfg):
    parser = subparsers.add_parser('loss', help='evaluate the self-supervised loss suite')
    parser.add_argument('--l1', required=True, help='left image at t1 (PNG)')
    parser.add_argument('--l2', required=True, help='left image at t2 (PNG)')
    parser.add_argument('--r1', required=True, help='right image at t1 (PNG)')
    parser.add_argument('--flow', required=True, help='optical flow 1->2 (16-bit PNG)')
    parser.add_argument('--disp-left', required=True, help='left disparity (PFM)')
    parser.add_argument('--disp-right', required=True, help='right disparity (PFM)')
    parser.add_argument('--pose', required=True, help='pose file: T12 or a trajectory')
    parser.add_argument('--frame', type=int, default=0)
    parser.add_argument('--pose-refined', help='refined T12 (single-line pose file)')
    parser.add_argument('--calib', required=True, help='calibration with baseline')
    parser.add_argument('--occlusion', help='non-occlusion mask PNG')
    parser.add_argument('--moving', help='moving-region mask PNG (default: from flow consistency)')
    parser.add_argument('--stage', type=int, choices=STAGES, default=3)
    parser.add_argument('--lambda-sm', type=float, help=f'default {cfg.LAMBDA_SM}')
    parser.add_argument('--lambda-st', type=float, help=f'default {cfg.LAMBDA_ST}')
    parser.add_argument('--lambda-rig', type=float, help=f'default {cfg.LAMBDA_RIG}')
    parser.add_argument('--lambda-con', type=float, help=f'default {cfg.LAMBDA_CON}')
    parser.add_argument('--alpha', type=float, help=f'SSIM blend, default {cfg.SSIM_ALPHA}')
    parser.add_argument('--beta', type=float, help=f'edge weight, default {cfg.EDGE_BETA}')
    parser.add_argument('--delta', type=float, help=f'motion threshold, default {cfg.MOTION_DELTA}')
    parser.add_argument('--gradients', action='store_true',
                        help='also report gradient norms of every differentiable pair')
    add_output(parser, 'JSON loss report')
    parser.set_defaults(func=lambda args: cmd_loss(args, cfg))
