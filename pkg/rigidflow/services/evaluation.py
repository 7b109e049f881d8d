"""
Evaluation Service - Flow, Depth, Odometry & Segmentation Metrics
=================================================================
KITTI-style metric battery:

    flow      EPE over noc / occ / all / moving / static pixels, Fl-all (%)
    depth     abs_rel, sq_rel, rmse, rmse_log, δ < 1.25ᵏ, D1-all (%)
    odometry  5-frame snippet ATE after scale alignment; devkit t_err / r_err
    segment   pixel accuracy, mean accuracy, mean IoU, frequency-weighted IoU

A flow or disparity estimate is erroneous when its error is at least 3 px
and at least 5 % of the ground-truth magnitude.
"""
import logging

import numpy as np
import pandas as pd

from ..exceptions import InvalidParameterError, check_same_shape
from ..models import DepthEval, DepthMap, FlowEval, FlowField, Mask, OdomEval, SegEval, StereoRig
from .geometry import compose, relative_poses, accumulate_poses
from .warp import flow_magnitude_diff

logger = logging.getLogger(__name__)

OUTLIER_PIXELS = 3.0
OUTLIER_RATIO = 0.05
MIN_DEPTH_EVAL = 1e-3
DEFAULT_DEPTH_CAP = 80.0
SNIPPET_FRAMES = 5
DEFAULT_LENGTHS = (100, 200, 300, 400, 500, 600, 700, 800)


def outlier_mask(error, magnitude):
    """Erroneous where ``error ≥ 3`` AND ``error ≥ 5 % of magnitude``."""
    return (error >= OUTLIER_PIXELS) & (error >= OUTLIER_RATIO * magnitude)


# ===== OPTICAL FLOW =====

def flow_metrics(pred: FlowField, gt: FlowField, masks=None) -> FlowEval:
    """
    End-point errors and Fl-all.

    Args:
        pred, gt: flow fields of equal size
        masks: optional dict of Mask with keys 'valid', 'noc', 'occ', 'move',
            'static'. 'occ' defaults to ¬noc and 'static' to ¬move.

    Returns:
        FlowEval; metrics over an empty mask are None and listed in ``undefined``
    """
    check_same_shape(gt.shape, pred.shape, 'prediction vs ground truth', source='pred')
    masks = dict(masks or {})
    for name, mask in masks.items():
        if mask is not None:
            check_same_shape(gt.shape, mask.shape, f'{name} mask', source=name)
    valid = masks['valid'].values if masks.get('valid') is not None else np.ones(gt.shape, dtype=bool)
    noc = masks['noc'].values if masks.get('noc') is not None else None
    occ = masks['occ'].values if masks.get('occ') is not None else (None if noc is None else ~noc)
    move = masks['move'].values if masks.get('move') is not None else None
    static = masks['static'].values if masks.get('static') is not None else (None if move is None else ~move)

    error = flow_magnitude_diff(pred, gt)
    undefined = []

    def mean_over(name, region):
        if region is None:
            undefined.append(name)
            return None
        region = region & valid
        if not region.any():
            logger.warning(f"⚠️ {name}: empty evaluation mask")
            undefined.append(name)
            return None
        return float(error[region].mean())

    fl_all = None
    if valid.any():
        magnitude = np.sqrt(gt.u ** 2 + gt.v ** 2)
        fl_all = float(100.0 * outlier_mask(error, magnitude)[valid].mean())
    else:
        undefined.append('fl_all')

    return FlowEval(
        epe_noc=mean_over('epe_noc', noc),
        epe_occ=mean_over('epe_occ', occ),
        epe_all=mean_over('epe_all', np.ones(gt.shape, dtype=bool)),
        epe_move=mean_over('epe_move', move),
        epe_static=mean_over('epe_static', static),
        fl_all=fl_all,
        undefined=undefined,
    )


# ===== DEPTH =====

def depth_metrics(pred: DepthMap, gt: DepthMap, cap=DEFAULT_DEPTH_CAP, rig: StereoRig = None) -> DepthEval:
    """
    Standard depth metrics over valid ground-truth pixels, both maps clamped
    to [1e-3, cap]. D1-all needs the stereo rig (disparity = B·fx / depth).
    """
    check_same_shape(gt.shape, pred.shape, 'prediction vs ground truth', source='pred')
    if not cap > MIN_DEPTH_EVAL:
        raise InvalidParameterError(f"depth cap must exceed {MIN_DEPTH_EVAL} m (got {cap})")
    valid = gt.validity
    if not valid.any():
        raise InvalidParameterError("ground truth holds no valid depth", source='gt')
    g = np.clip(gt.values[valid], MIN_DEPTH_EVAL, cap)
    p = np.clip(np.where(pred.validity, pred.values, MIN_DEPTH_EVAL)[valid], MIN_DEPTH_EVAL, cap)

    ratio = np.maximum(g / p, p / g)
    d1_all = None
    undefined = []
    if rig is None:
        undefined.append('d1_all')
    else:
        scale = rig.baseline * rig.intrinsics.fx
        disp_gt = scale / g
        disp_error = np.abs(scale / p - disp_gt)
        d1_all = float(100.0 * outlier_mask(disp_error, disp_gt).mean())

    return DepthEval(
        abs_rel=float(np.mean(np.abs(p - g) / g)),
        sq_rel=float(np.mean((p - g) ** 2 / g)),
        rmse=float(np.sqrt(np.mean((p - g) ** 2))),
        rmse_log=float(np.sqrt(np.mean((np.log(p) - np.log(g)) ** 2))),
        d1_all=d1_all,
        delta1=float(np.mean(ratio < 1.25)),
        delta2=float(np.mean(ratio < 1.25 ** 2)),
        delta3=float(np.mean(ratio < 1.25 ** 3)),
        undefined=undefined,
    )


# ===== ODOMETRY =====

class OdometryEvaluator:
    """
    Trajectory errors.

    Args:
        lengths: sub-sequence lengths in meters for the devkit errors
        step: start-frame stride for the devkit errors
        mean_norm: ATE as mean residual norm instead of RMSE
    """

    def __init__(self, lengths=DEFAULT_LENGTHS, step=1, mean_norm=False):
        if step < 1:
            raise InvalidParameterError(f"step must be at least 1 (got {step})")
        self.lengths = tuple(lengths)
        self.step = step
        self.mean_norm = mean_norm

    @staticmethod
    def _snippet_positions(motions):
        return np.array([pose.translation for pose in accumulate_poses(motions)])

    def snippet_errors(self, pred_rel, gt_rel) -> pd.DataFrame:
        """One row per 5-frame snippet (stride 1): start, scale, ate, skipped."""
        if len(pred_rel) != len(gt_rel):
            raise InvalidParameterError(
                f"prediction has {len(pred_rel)} relative poses, ground truth {len(gt_rel)}")
        span = SNIPPET_FRAMES - 1
        if len(gt_rel) < span:
            raise InvalidParameterError(f"ATE needs at least {SNIPPET_FRAMES} frames")
        rows = []
        for start in range(len(gt_rel) - span + 1):
            p = self._snippet_positions(pred_rel[start:start + span])
            g = self._snippet_positions(gt_rel[start:start + span])
            if not np.any(g):
                rows.append({'start': start, 'scale': np.nan, 'ate': np.nan, 'skipped': True})
                continue
            pred_energy = np.einsum('ni,ni->', p, p)
            scale = np.einsum('ni,ni->', p, g) / pred_energy if pred_energy > 0 else 0.0
            residual = np.linalg.norm(scale * p - g, axis=1)
            ate = residual.mean() if self.mean_norm else np.sqrt(np.mean(residual ** 2))
            rows.append({'start': start, 'scale': float(scale), 'ate': float(ate), 'skipped': False})
        table = pd.DataFrame(rows, columns=['start', 'scale', 'ate', 'skipped'])
        skipped = int(table['skipped'].sum())
        if skipped:
            logger.warning(f"⚠️ {skipped} ATE snippets skipped: ground-truth translations are all zero")
        return table

    def ate(self, pred_rel, gt_rel):
        table = self.snippet_errors(pred_rel, gt_rel)
        used = table.loc[~table['skipped'], 'ate']
        if used.empty:
            return None, None, table
        return float(used.mean()), float(used.std(ddof=0)), table

    @staticmethod
    def _path_lengths(trajectory):
        positions = np.array([pose.translation for pose in trajectory])
        steps = np.linalg.norm(np.diff(positions, axis=0), axis=1)
        return np.concatenate([[0.0], np.cumsum(steps)])

    def segment_errors(self, pred_traj, gt_traj) -> pd.DataFrame:
        """Devkit relative errors for every (start frame, length) pair."""
        if len(pred_traj) != len(gt_traj):
            raise InvalidParameterError(
                f"prediction has {len(pred_traj)} poses, ground truth {len(gt_traj)}")
        distances = self._path_lengths(gt_traj)
        rows = []
        for first in range(0, len(gt_traj), self.step):
            for length in self.lengths:
                beyond = np.flatnonzero(distances > distances[first] + length)
                if beyond.size == 0:
                    continue
                last = int(beyond[0])
                delta_gt = compose(gt_traj[first].inverse(), gt_traj[last])
                delta_pred = compose(pred_traj[first].inverse(), pred_traj[last])
                error = compose(delta_pred.inverse(), delta_gt)
                rows.append({
                    'first_frame': first,
                    'length': length,
                    't_err': float(np.linalg.norm(error.translation) / length),
                    'r_err': error.rotation_angle() / length,
                })
        return pd.DataFrame(rows, columns=['first_frame', 'length', 't_err', 'r_err'])

    def relative_errors(self, pred_traj, gt_traj):
        table = self.segment_errors(pred_traj, gt_traj)
        if table.empty:
            logger.warning("⚠️ trajectory shorter than the smallest sub-sequence length; no odometry errors")
            return None, None, table
        t_err = float(table['t_err'].mean() * 100.0)
        r_err = float(np.degrees(table['r_err'].mean()) * 100.0)
        return t_err, r_err, table

    def evaluate(self, pred_traj, gt_traj) -> OdomEval:
        ate_mean = ate_std = None
        snippets = None
        if len(gt_traj) >= SNIPPET_FRAMES:
            ate_mean, ate_std, snippets = self.ate(relative_poses(pred_traj), relative_poses(gt_traj))
        t_err, r_err, segments = self.relative_errors(pred_traj, gt_traj)
        skipped = 0 if snippets is None else int(snippets['skipped'].sum())
        return OdomEval(ate_mean, ate_std, t_err, r_err, snippets=snippets,
                        segments=segments, skipped_snippets=skipped)


def ate_5frame(pred_rel_poses, gt_rel_poses, mean_norm=False):
    """
    Mean and standard deviation of the scale-aligned ATE over all 5-frame
    snippets of two relative-pose sequences.
    """
    mean, std, _ = OdometryEvaluator(mean_norm=mean_norm).ate(pred_rel_poses, gt_rel_poses)
    return mean, std


def kitti_odom_errors(pred_traj, gt_traj, lengths=DEFAULT_LENGTHS, step=1):
    """
    Devkit translational error (%) and rotational error (°/100 m) averaged
    over all sub-sequences; ``(None, None)`` when no sub-sequence fits.
    """
    t_err, r_err, _ = OdometryEvaluator(lengths, step).relative_errors(pred_traj, gt_traj)
    return t_err, r_err


def odometry_metrics(pred_traj, gt_traj, lengths=DEFAULT_LENGTHS, step=1, mean_norm=False) -> OdomEval:
    """Both odometry metrics from two camera-to-world trajectories."""
    return OdometryEvaluator(lengths, step, mean_norm).evaluate(pred_traj, gt_traj)


# ===== SEGMENTATION =====

def confusion_matrix(pred: Mask, gt: Mask) -> np.ndarray:
    """2×2 counts, rows = ground truth (static, moving), columns = prediction."""
    check_same_shape(gt.shape, pred.shape, 'prediction vs ground truth', source='pred')
    codes = 2 * gt.values.astype(np.int64).reshape(-1) + pred.values.astype(np.int64).reshape(-1)
    return np.bincount(codes, minlength=4).reshape(2, 2)


def seg_metrics(pred: Mask, gt: Mask) -> SegEval:
    """Two-class segmentation scores; classes absent from both maps are ignored."""
    confusion = confusion_matrix(pred, gt).astype(np.float64)
    total = confusion.sum()
    if total == 0:
        logger.warning("⚠️ segmentation: empty raster, nothing to score")
        return SegEval(pixel_acc=None, mean_acc=None, mean_iou=None, fw_iou=None,
                       undefined=['pixel_acc', 'mean_acc', 'mean_iou', 'fw_iou'])
    diagonal = np.diag(confusion)
    gt_count = confusion.sum(axis=1)
    union = gt_count + confusion.sum(axis=0) - diagonal
    present = gt_count > 0
    scored = union > 0
    class_acc = diagonal[present] / gt_count[present]
    iou = np.zeros(2)
    iou[scored] = diagonal[scored] / union[scored]
    frequency = gt_count / total
    return SegEval(
        pixel_acc=float(diagonal.sum() / total),
        mean_acc=float(class_acc.mean()),
        mean_iou=float(iou[scored].mean()),
        fw_iou=float((frequency[scored] * iou[scored]).sum()),
    )
