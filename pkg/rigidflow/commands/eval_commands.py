"""
Evaluation Commands
===================
    eval flow|depth|odometry|segmentation  metrics JSON (optionally a workbook)
"""
import logging
import os

from ..exceptions import DimensionMismatchError, check_same_shape
from ..models import EvalTask, Mask
from ..services.evaluation import depth_metrics, flow_metrics, odometry_metrics, seg_metrics
from ..services.formats import read_depth, read_mask, read_poses, write_json
from ..services.report_export import export_workbook
from .common import add_output, load_flow, load_rig, success

logger = logging.getLogger(__name__)


def _mask(path, shape):
    if not path:
        return None
    mask = read_mask(path)
    check_same_shape(shape, mask.shape, 'mask', source=os.fspath(path))
    return mask


def evaluate_flow(args):
    gt, gt_valid = load_flow(args.gt)
    pred, _ = load_flow(args.pred, gt.shape)
    masks = {
        'valid': gt_valid,
        'noc': _mask(args.noc, gt.shape),
        'move': _mask(args.move, gt.shape),
    }
    return flow_metrics(pred, gt, masks)


def evaluate_depth(args):
    gt = read_depth(args.gt)
    pred = read_depth(args.pred)
    check_same_shape(gt.shape, pred.shape, 'prediction vs ground truth', source=args.pred)
    rig = load_rig(args.calib) if args.calib else None
    return depth_metrics(pred, gt, cap=args.cap, rig=rig)


def evaluate_odometry(args):
    pred = read_poses(args.pred)
    gt = read_poses(args.gt)
    if len(pred) != len(gt):
        raise DimensionMismatchError(f"trajectories hold {len(pred)} and {len(gt)} poses", source=args.pred)
    return odometry_metrics(pred, gt, lengths=args.lengths, step=args.step, mean_norm=args.mean_norm)


def evaluate_segmentation(args):
    gt = read_mask(args.gt)
    pred = read_mask(args.pred)
    check_same_shape(gt.shape, pred.shape, 'prediction vs ground truth', source=args.pred)
    if args.noc:
        # pixels outside the evaluation region count as static in both maps
        region = _mask(args.noc, gt.shape).values
        gt = Mask(gt.values & region)
        pred = Mask(pred.values & region)
    return seg_metrics(pred, gt)


EVALUATORS = {
    EvalTask.FLOW.value: evaluate_flow,
    EvalTask.DEPTH.value: evaluate_depth,
    EvalTask.ODOMETRY.value: evaluate_odometry,
    EvalTask.SEGMENTATION.value: evaluate_segmentation,
}


def cmd_eval(args):
    result = EVALUATORS[args.task](args)
    payload = result.to_dict()
    write_json(args.out, payload)
    if args.xlsx:
        name = os.path.splitext(os.path.basename(os.fspath(args.out)))[0]
        export_workbook(args.xlsx, [(name, payload)])
    for name in payload.get('undefined', []):
        print(f"⚠️ {name} is undefined for these inputs")
    success(f"{args.task} metrics written to {args.out}")
    return 0


def register(subparsers, cfg):
    parser = subparsers.add_parser('eval', help='evaluate predictions against ground truth')
    parser.add_argument('task', choices=list(EVALUATORS))
    parser.add_argument('--pred', required=True, help='prediction (flow PNG, depth PFM, pose file or mask PNG)')
    parser.add_argument('--gt', required=True, help='ground truth in the same format')
    parser.add_argument('--noc', help='non-occluded mask PNG (flow, segmentation)')
    parser.add_argument('--move', help='moving-region mask PNG (flow)')
    parser.add_argument('--cap', type=float, default=cfg.DEPTH_CAP, help='depth cap in meters')
    parser.add_argument('--calib', help='calibration with baseline; enables D1-all (depth)')
    parser.add_argument('--lengths', type=int, nargs='+', default=list(cfg.ODOM_LENGTHS),
                        help='sub-sequence lengths in meters (odometry)')
    parser.add_argument('--step', type=int, default=cfg.ODOM_STEP, help='start-frame stride (odometry)')
    parser.add_argument('--mean-norm', action='store_true',
                        help='ATE as the mean position error instead of the RMSE (odometry)')
    add_output(parser, 'JSON metrics report')
    parser.add_argument('--xlsx', help='also write the report to an Excel workbook')
    parser.set_defaults(func=cmd_eval)
