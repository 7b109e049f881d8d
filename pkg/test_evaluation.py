"""
Tests for flow, depth, odometry and segmentation metrics.
"""
import logging

import numpy as np
import pytest

from rigidflow.exceptions import DimensionMismatchError, InvalidParameterError
from rigidflow.models import DepthMap, FlowField, Mask, PoseSE3, StereoRig
from rigidflow.services.evaluation import (OdometryEvaluator, ate_5frame, confusion_matrix, depth_metrics,
                                           flow_metrics, kitti_odom_errors, odometry_metrics, seg_metrics)
from rigidflow.services.geometry import accumulate_poses, pose_from_6dof, relative_poses


def constant_flow(u, v=0.0, height=4, width=5):
    uv = np.zeros((height, width, 2))
    uv[..., 0] = u
    uv[..., 1] = v
    return FlowField(uv)


# ===== optical flow =====

def test_perfect_flow_scores_zero(rng):
    gt = FlowField(rng.normal(scale=10.0, size=(6, 7, 2)))
    result = flow_metrics(gt, gt)
    assert result.epe_all == 0.0
    assert result.fl_all == 0.0


@pytest.mark.parametrize('gt_u, pred_u, erroneous', [
    (10.0, 12.9, False),    # below 3 px
    (100.0, 104.0, False),  # 4 px is under 5 % of 100 px
    (10.0, 14.0, True),     # 4 px and 40 % of 10 px
    (10.0, 13.0, True),     # exactly 3 px counts as erroneous
])
def test_outlier_rule(gt_u, pred_u, erroneous):
    result = flow_metrics(constant_flow(pred_u), constant_flow(gt_u))
    assert result.fl_all == (100.0 if erroneous else 0.0)


def test_flow_metrics_match_pixel_loop(rng):
    gt = FlowField(rng.normal(scale=8.0, size=(6, 7, 2)))
    pred = FlowField(gt.uv + rng.normal(scale=3.0, size=(6, 7, 2)))
    valid = rng.uniform(size=(6, 7)) > 0.2
    noc = rng.uniform(size=(6, 7)) > 0.3
    move = rng.uniform(size=(6, 7)) > 0.7
    result = flow_metrics(pred, gt, {'valid': Mask(valid), 'noc': Mask(noc), 'move': Mask(move)})

    sums = {'noc': [], 'occ': [], 'all': [], 'move': [], 'static': []}
    outliers = []
    for i in range(6):
        for j in range(7):
            if not valid[i, j]:
                continue
            du, dv = pred.uv[i, j] - gt.uv[i, j]
            error = np.hypot(du, dv)
            magnitude = np.hypot(*gt.uv[i, j])
            outliers.append(error >= 3.0 and error >= 0.05 * magnitude)
            sums['all'].append(error)
            sums['noc' if noc[i, j] else 'occ'].append(error)
            sums['move' if move[i, j] else 'static'].append(error)

    assert result.epe_all == pytest.approx(np.mean(sums['all']), rel=1e-12)
    assert result.epe_noc == pytest.approx(np.mean(sums['noc']), rel=1e-12)
    assert result.epe_occ == pytest.approx(np.mean(sums['occ']), rel=1e-12)
    assert result.epe_move == pytest.approx(np.mean(sums['move']), rel=1e-12)
    assert result.epe_static == pytest.approx(np.mean(sums['static']), rel=1e-12)
    assert result.fl_all == pytest.approx(100.0 * np.mean(outliers), rel=1e-12)


def test_missing_masks_leave_metrics_undefined():
    result = flow_metrics(constant_flow(1.0), constant_flow(0.0))
    assert result.epe_all == pytest.approx(1.0)
    assert result.epe_noc is None and result.epe_move is None
    assert set(result.undefined) == {'epe_noc', 'epe_occ', 'epe_move', 'epe_static'}
    assert result.to_dict()['epe_noc'] is None


def test_empty_mask_warns(caplog):
    with caplog.at_level(logging.WARNING):
        result = flow_metrics(constant_flow(1.0), constant_flow(0.0), {'move': Mask.full(4, 5, False)})
    assert result.epe_move is None
    assert result.epe_static == pytest.approx(1.0)
    assert 'epe_move' in caplog.text


def test_flow_shape_mismatch():
    with pytest.raises(DimensionMismatchError):
        flow_metrics(constant_flow(0.0, width=6), constant_flow(0.0))


# ===== depth =====

def test_perfect_depth(rng):
    gt = DepthMap(rng.uniform(2.0, 60.0, (5, 6)))
    result = depth_metrics(gt, gt)
    assert result.abs_rel == 0.0 and result.rmse == 0.0
    assert result.delta1 == 1.0
    assert result.d1_all is None
    assert result.undefined == ['d1_all']
    assert result.to_dict()['undefined'] == ['d1_all']


def test_scaled_depth(rng):
    values = rng.uniform(2.0, 60.0, (5, 6))
    result = depth_metrics(DepthMap(1.1 * values), DepthMap(values))
    assert result.abs_rel == pytest.approx(0.1)
    assert result.sq_rel == pytest.approx(0.01 * values.mean())
    assert result.rmse == pytest.approx(0.1 * np.sqrt(np.mean(values ** 2)))
    assert result.rmse_log == pytest.approx(np.log(1.1))
    assert result.delta1 == 1.0


def test_depth_metrics_match_pixel_loop(rng):
    gt_values = rng.uniform(1.0, 90.0, (5, 6))
    gt_values[0, 0] = 0.0
    pred_values = rng.uniform(1.0, 90.0, (5, 6))
    result = depth_metrics(DepthMap(pred_values), DepthMap(gt_values), cap=80.0)

    pairs = [(min(max(p, 1e-3), 80.0), min(max(g, 1e-3), 80.0))
             for p, g in zip(pred_values.ravel(), gt_values.ravel()) if g > 0]
    p = np.array([a for a, _ in pairs])
    g = np.array([b for _, b in pairs])
    assert result.abs_rel == pytest.approx(np.mean(np.abs(p - g) / g))
    assert result.rmse == pytest.approx(np.sqrt(np.mean((p - g) ** 2)))
    ratio = np.maximum(p / g, g / p)
    assert result.delta2 == pytest.approx(np.mean(ratio < 1.25 ** 2))


def test_depth_cap_clamps_both_maps():
    result = depth_metrics(DepthMap(np.full((2, 2), 90.0)), DepthMap(np.full((2, 2), 100.0)), cap=80.0)
    assert result.abs_rel == 0.0


def test_disparity_outliers(small_k):
    rig = StereoRig(small_k, 0.5)
    gt = DepthMap(np.full((8, 8), 0.5))
    # gt disparity 8 px: 2× depth halves it (4 px error), 1.1× is under 3 px
    pred = np.full((8, 8), 1.1 * 0.5)
    pred[:4] = 1.0
    result = depth_metrics(DepthMap(pred), gt, rig=rig)
    assert result.d1_all == pytest.approx(50.0)
    assert result.undefined == []


def test_depth_needs_valid_ground_truth():
    with pytest.raises(InvalidParameterError):
        depth_metrics(DepthMap(np.ones((2, 2))), DepthMap(np.zeros((2, 2))))


# ===== odometry =====

def random_trajectory(rng, frames):
    motions = [pose_from_6dof(np.concatenate([rng.uniform(-0.5, 0.5, 2), [rng.uniform(0.5, 1.5)],
                                              rng.uniform(-0.05, 0.05, 3)]))
               for _ in range(frames - 1)]
    return accumulate_poses(motions)


def scaled_motions(motions, scale):
    return [PoseSE3(m.rotation, scale * m.translation) for m in motions]


def test_scaled_prediction_has_zero_ate(rng):
    gt = random_trajectory(rng, 9)
    pred = accumulate_poses(scaled_motions(relative_poses(gt), 2.5))
    mean, std = ate_5frame(relative_poses(pred), relative_poses(gt))
    assert mean == pytest.approx(0.0, abs=1e-12)
    assert std == pytest.approx(0.0, abs=1e-12)


def test_snippet_scale_is_least_squares(rng):
    gt = random_trajectory(rng, 5)
    table = OdometryEvaluator().snippet_errors(scaled_motions(relative_poses(gt), 0.5), relative_poses(gt))
    assert len(table) == 1
    assert table.loc[0, 'scale'] == pytest.approx(2.0)


def test_ate_counts_one_snippet_per_start(rng):
    gt = random_trajectory(rng, 12)
    noisy = [pose_from_6dof(np.concatenate([m.translation + rng.normal(scale=0.05, size=3), np.zeros(3)]))
             for m in relative_poses(gt)]
    evaluator = OdometryEvaluator()
    mean, std, table = evaluator.ate(noisy, relative_poses(gt))
    assert len(table) == 12 - 4
    assert mean > 0 and std >= 0
    rmse_mean, _, _ = evaluator.ate(noisy, relative_poses(gt))
    mean_norm, _, _ = OdometryEvaluator(mean_norm=True).ate(noisy, relative_poses(gt))
    assert mean_norm <= rmse_mean + 1e-15


def test_stationary_snippets_are_skipped(caplog):
    motions = [PoseSE3.identity()] * 4
    with caplog.at_level(logging.WARNING):
        mean, std = ate_5frame(motions, motions)
    assert mean is None and std is None
    assert 'skipped' in caplog.text


def straight_trajectory(frames, step=10.0, scale=1.0):
    return [PoseSE3(np.eye(3), np.array([0.0, 0.0, scale * step * i])) for i in range(frames)]


def test_segment_errors_follow_devkit():
    gt = straight_trajectory(21)
    pred = straight_trajectory(21, scale=1.01)
    evaluator = OdometryEvaluator(lengths=(100,))
    table = evaluator.segment_errors(pred, gt)
    # the first frame more than 100 m further is 110 m away; starts 0..9 qualify
    assert list(table['first_frame']) == list(range(10))
    np.testing.assert_allclose(table['t_err'], 1.1 / 100.0, rtol=1e-9)
    t_err, r_err = kitti_odom_errors(pred, gt, lengths=(100,))
    assert t_err == pytest.approx(1.1, rel=1e-9)
    assert r_err == pytest.approx(0.0, abs=1e-12)


def test_rotational_drift():
    gt = straight_trajectory(21)
    yaw = pose_from_6dof([0.0, 0.0, 0.0, 0.0, np.radians(0.1), 0.0]).rotation
    pred, rotation = [], np.eye(3)
    for pose in gt:
        pred.append(PoseSE3(rotation, pose.translation))
        rotation = rotation @ yaw
    _, r_err = kitti_odom_errors(pred, gt, lengths=(100,))
    # 11 frames of 0.1° drift over each 100 m segment
    assert r_err == pytest.approx(1.1, rel=1e-6)


def test_segment_step_and_per_length_table():
    gt = straight_trajectory(41)
    pred = straight_trajectory(41, scale=1.02)
    result = odometry_metrics(pred, gt, lengths=(100, 200), step=2)
    assert set(result.segments['first_frame']) <= set(range(0, 41, 2))
    table = result.per_length()
    assert set(table) == {'100', '200'}
    assert table['100']['t_err_percent'] == pytest.approx(2.2, rel=1e-9)
    assert table['200']['t_err_percent'] == pytest.approx(2.1, rel=1e-9)
    assert result.to_dict()['per_length'] == table


def test_short_trajectory_has_no_segments(rng, caplog):
    gt = random_trajectory(rng, 6)
    with caplog.at_level(logging.WARNING):
        result = odometry_metrics(gt, gt)
    assert result.t_err_percent is None and result.r_err_deg_per_100m is None
    assert result.ate_mean == pytest.approx(0.0, abs=1e-12)


def test_odometry_length_mismatch(rng):
    with pytest.raises(InvalidParameterError):
        odometry_metrics(random_trajectory(rng, 6), random_trajectory(rng, 7))
    with pytest.raises(InvalidParameterError):
        OdometryEvaluator(step=0)


# ===== segmentation =====

def test_confusion_matrix_layout():
    gt = Mask(np.array([[1, 1], [0, 0]]))
    pred = Mask(np.array([[1, 0], [0, 0]]))
    np.testing.assert_array_equal(confusion_matrix(pred, gt), [[2, 0], [1, 1]])


def test_segmentation_scores():
    gt = Mask(np.array([[1, 1], [0, 0]]))
    pred = Mask(np.array([[1, 0], [0, 0]]))
    result = seg_metrics(pred, gt)
    assert result.pixel_acc == pytest.approx(0.75)
    assert result.mean_acc == pytest.approx(0.75)
    assert result.mean_iou == pytest.approx(7.0 / 12.0)
    assert result.fw_iou == pytest.approx(7.0 / 12.0)


def test_perfect_segmentation(rng):
    gt = Mask(rng.uniform(size=(6, 6)) > 0.5)
    result = seg_metrics(gt, gt)
    assert result.pixel_acc == result.mean_acc == result.mean_iou == result.fw_iou == 1.0


def test_absent_class_is_ignored():
    gt = Mask.full(3, 3, False)
    result = seg_metrics(Mask.full(3, 3, False), gt)
    assert result.mean_iou == 1.0 and result.mean_acc == 1.0
    # a false positive creates the moving class in the union only
    pred = np.zeros((3, 3), dtype=bool)
    pred[0, 0] = True
    result = seg_metrics(Mask(pred), gt)
    assert result.mean_iou == pytest.approx((8.0 / 9.0 + 0.0) / 2.0)
    assert result.mean_acc == pytest.approx(8.0 / 9.0)


def test_empty_raster_leaves_segmentation_undefined():
    empty = Mask(np.zeros((0, 4), dtype=bool))
    result = seg_metrics(empty, empty)
    assert result.pixel_acc is None and result.mean_iou is None
    assert set(result.undefined) == {'pixel_acc', 'mean_acc', 'mean_iou', 'fw_iou'}
    assert result.to_dict()['fw_iou'] is None
