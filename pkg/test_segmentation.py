"""
Tests for the flow-consistency motion mask.
"""
import numpy as np
import pytest

from rigidflow.exceptions import DimensionMismatchError, InvalidParameterError
from rigidflow.models import FlowField, Mask, SegmentationParams
from rigidflow.services import synth
from rigidflow.services.evaluation import seg_metrics
from rigidflow.services.rigid_alignment import rigid_flow
from rigidflow.services.segmentation import motion_mask


def test_identical_flows_are_static(rng):
    flow = FlowField(rng.normal(scale=5.0, size=(6, 8, 2)))
    assert motion_mask(flow, flow, Mask.full(6, 8)).count() == 0


def test_threshold_is_strict():
    f_rig = FlowField.zeros(2, 3)
    uv = np.zeros((2, 3, 2))
    uv[0, 0] = [3.0, 0.0]
    uv[0, 1] = [3.0, 0.5]
    uv[1, 2] = [0.0, -2.9]
    mask = motion_mask(FlowField(uv), f_rig, Mask.full(2, 3))
    np.testing.assert_array_equal(mask.values, [[False, True, False], [False, False, False]])


def test_custom_delta():
    f_opt = FlowField(np.full((2, 2, 2), 1.0))
    mask = motion_mask(f_opt, FlowField.zeros(2, 2), Mask.full(2, 2), SegmentationParams(delta=1.0))
    assert mask.values.all()


def test_occluded_pixels_never_move(rng):
    f_opt = FlowField(rng.normal(scale=20.0, size=(8, 8, 2)))
    visible = Mask(rng.uniform(size=(8, 8)) > 0.4)
    mask = motion_mask(f_opt, FlowField.zeros(8, 8), visible)
    assert not (mask.values & ~visible.values).any()


def test_delta_must_be_positive():
    with pytest.raises(InvalidParameterError):
        SegmentationParams(delta=0.0)


def test_occlusion_mask_size_checked():
    with pytest.raises(DimensionMismatchError):
        motion_mask(FlowField.zeros(4, 4), FlowField.zeros(4, 4), Mask.full(4, 5))


def test_ground_truth_flows_recover_moving_object(moving_sample):
    sample = moving_sample
    mask = motion_mask(sample.flow12, sample.rigid12, sample.occlusion1)
    truth = Mask(sample.moving1.values & sample.occlusion1.values)
    assert truth.count() > 0
    np.testing.assert_array_equal(mask.values, truth.values)
    assert seg_metrics(mask, truth).mean_iou == pytest.approx(1.0)


def test_static_scene_has_no_motion(static_sample):
    mask = motion_mask(static_sample.flow12, static_sample.rigid12, static_sample.occlusion1)
    assert mask.count() == 0


def test_generated_scenes_recover_moving_objects():
    worst = 1.0
    for seed in range(50):
        sample = synth.render(synth.generate_scene_config(seed))
        flow_rig, _ = rigid_flow(sample.depth1, sample.camera_motion, sample.intrinsics)
        mask = motion_mask(sample.flow12, flow_rig, sample.occlusion1).values
        truth = sample.moving1.values & sample.occlusion1.values
        assert not (mask & ~sample.occlusion1.values).any()
        worst = min(worst, (mask & truth).sum() / (mask | truth).sum())
    assert worst > 0.95


def test_larger_delta_flags_a_subset(rng):
    f_opt = FlowField(rng.normal(scale=4.0, size=(8, 8, 2)))
    f_rig = FlowField.zeros(8, 8)
    visible = Mask.full(8, 8)
    loose = motion_mask(f_opt, f_rig, visible, SegmentationParams(delta=2.0)).values
    strict = motion_mask(f_opt, f_rig, visible, SegmentationParams(delta=4.0)).values
    assert not (strict & ~loose).any()


def test_common_flow_offset_is_ignored(rng):
    f_opt = FlowField(rng.normal(scale=4.0, size=(8, 8, 2)))
    f_rig = FlowField(rng.normal(scale=4.0, size=(8, 8, 2)))
    offset = np.array([0.25, -0.5])
    visible = Mask(rng.uniform(size=(8, 8)) > 0.2)
    np.testing.assert_array_equal(motion_mask(FlowField(f_opt.uv + offset), FlowField(f_rig.uv + offset),
                                              visible).values,
                                  motion_mask(f_opt, f_rig, visible).values)
