"""
Tests for bilinear warping, cloud warping and occlusion estimation.
"""
import numpy as np
import pytest

from rigidflow.exceptions import DimensionMismatchError
from rigidflow.models import FlowField, Image, PointCloud
from rigidflow.services.warp import (bilinear_warp, bilinear_warp_adjoint, estimate_occlusion,
                                     flow_magnitude_diff, range_map, warp_cloud, warp_image)


def constant_flow(height, width, u, v):
    uv = np.zeros((height, width, 2))
    uv[..., 0] = u
    uv[..., 1] = v
    return FlowField(uv)


def test_zero_flow_is_identity(rng):
    source = rng.uniform(size=(6, 7, 3))
    warped, in_bounds = bilinear_warp(source, FlowField.zeros(6, 7))
    np.testing.assert_array_equal(warped, source)
    assert in_bounds.values.all()


def test_integer_shift_samples_neighbor(rng):
    source = rng.uniform(size=(5, 6))
    warped, in_bounds = bilinear_warp(source, constant_flow(5, 6, 1.0, 0.0))
    np.testing.assert_array_equal(warped[:, :-1], source[:, 1:])
    # the last column samples x = width, which lies outside the raster
    assert not in_bounds.values[:, -1].any()
    np.testing.assert_array_equal(warped[:, -1], 0.0)


def test_half_pixel_shift_averages_neighbors(rng):
    source = rng.uniform(size=(4, 5))
    warped, _ = bilinear_warp(source, constant_flow(4, 5, 0.5, 0.0))
    np.testing.assert_allclose(warped[:, :-1], 0.5 * (source[:, :-1] + source[:, 1:]), atol=1e-15)


def test_sample_partially_outside_keeps_in_bounds(rng):
    source = np.ones((4, 4))
    warped, in_bounds = bilinear_warp(source, constant_flow(4, 4, -0.25, 0.0))
    # x = -0.25: the left tap is outside and contributes zero
    assert in_bounds.values[:, 0].all()
    np.testing.assert_allclose(warped[:, 0], 0.75, atol=1e-15)


def test_half_pixel_shift_of_a_ramp():
    source = np.tile(np.arange(6, dtype=np.float64), (3, 1))
    warped, _ = bilinear_warp(source, constant_flow(3, 6, 0.5, 0.0))
    np.testing.assert_allclose(warped[:, :-1], source[:, :-1] + 0.5, atol=1e-15)


def test_flow_far_past_the_border_samples_nothing(rng):
    warped, in_bounds = bilinear_warp(rng.uniform(size=(4, 5, 2)), constant_flow(4, 5, 10.0, 0.0))
    np.testing.assert_array_equal(warped, 0.0)
    assert not in_bounds.values.any()


def test_warp_is_linear_in_the_source(rng):
    flow = FlowField(rng.uniform(-3.0, 3.0, (6, 7, 2)))
    a = rng.normal(size=(6, 7, 3))
    b = rng.normal(size=(6, 7, 3))
    combined, _ = bilinear_warp(2.5 * a - 0.75 * b, flow)
    separate = 2.5 * bilinear_warp(a, flow)[0] - 0.75 * bilinear_warp(b, flow)[0]
    np.testing.assert_allclose(combined, separate, atol=1e-12)


def mirror_flow(flow):
    uv = flow.uv[:, ::-1].copy()
    uv[..., 0] *= -1.0
    return FlowField(uv)


def test_warp_commutes_with_horizontal_flip(rng):
    flow = FlowField(rng.uniform(-2.5, 2.5, (6, 9, 2)))
    source = rng.uniform(size=(6, 9, 3))
    warped, in_bounds = bilinear_warp(source, flow)
    flipped, flipped_bounds = bilinear_warp(source[:, ::-1], mirror_flow(flow))
    np.testing.assert_allclose(flipped, warped[:, ::-1], atol=1e-12)
    np.testing.assert_array_equal(flipped_bounds.values, in_bounds.values[:, ::-1])


def test_occlusion_commutes_with_horizontal_flip(rng):
    flow21 = FlowField(rng.uniform(-1.5, 1.5, (6, 9, 2)))
    coverage = range_map(flow21)
    np.testing.assert_allclose(range_map(mirror_flow(flow21)), coverage[:, ::-1], atol=1e-12)
    np.testing.assert_array_equal(estimate_occlusion(mirror_flow(flow21)).values,
                                  estimate_occlusion(flow21).values[:, ::-1])


def test_range_map_is_non_negative_and_bounded(rng):
    flow21 = FlowField(rng.uniform(-4.0, 4.0, (7, 8, 2)))
    coverage = range_map(flow21)
    assert coverage.min() >= 0.0
    assert coverage.sum() <= coverage.size + 1e-9


def test_two_pixels_landing_on_one_vacate_their_origin():
    uv = np.zeros((1, 3, 2))
    uv[0, 1, 0] = -1.0
    flow21 = FlowField(uv)
    np.testing.assert_allclose(range_map(flow21), [[2.0, 0.0, 1.0]])
    np.testing.assert_array_equal(estimate_occlusion(flow21).values, [[True, False, True]])


def test_occlusion_estimate_matches_rendered_visibility_near_moving_object(moving_sample):
    sample = moving_sample
    estimated = ~estimate_occlusion(sample.flow21).values
    truth = ~sample.occlusion1.values
    # object rows plus margin; the object slides right across columns 40-100
    band = np.zeros(truth.shape, dtype=bool)
    band[8:44, 30:110] = True
    assert (truth & band).sum() > 300
    iou = (estimated & truth & band).sum() / ((estimated | truth) & band).sum()
    assert iou > 0.8


def test_warp_dimension_mismatch():
    with pytest.raises(DimensionMismatchError):
        bilinear_warp(np.zeros((4, 5)), FlowField.zeros(4, 4))


def test_adjoint_satisfies_inner_product_identity(rng):
    flow = FlowField(rng.uniform(-2.0, 2.0, (6, 7, 2)))
    source = rng.normal(size=(6, 7, 2))
    grad = rng.normal(size=(6, 7, 2))
    warped, _ = bilinear_warp(source, flow)
    lhs = np.sum(warped * grad)
    rhs = np.sum(source * bilinear_warp_adjoint(grad, flow))
    assert lhs == pytest.approx(rhs, rel=1e-12)


def test_warp_image_wraps_result():
    image = Image(np.full((3, 3, 3), 0.4))
    warped, in_bounds = warp_image(image, FlowField.zeros(3, 3))
    assert isinstance(warped, Image)
    np.testing.assert_allclose(warped.channels, 0.4)
    assert in_bounds.count() == 9


def test_warp_cloud_invalidates_samples_touching_invalid_points():
    points = np.ones((4, 4, 3))
    validity = np.ones((4, 4), dtype=bool)
    validity[1, 2] = False
    flow = constant_flow(4, 4, 0.5, 0.0)
    warped = warp_cloud(PointCloud(points, validity), flow)
    # pixels whose kernel reaches (1, 2): (1, 1) and (1, 2)
    assert not warped.validity[1, 1] and not warped.validity[1, 2]
    assert warped.validity[1, 0]
    # the last column samples x = 3.5, whose right tap is outside
    assert not warped.validity[:, 3].any()
    np.testing.assert_allclose(warped.points[0, 0], [1.0, 1.0, 1.0])


def test_warp_cloud_integer_flow_keeps_zero_weight_taps_harmless():
    points = np.arange(48, dtype=np.float64).reshape(4, 4, 3)
    validity = np.ones((4, 4), dtype=bool)
    validity[1, 2] = False
    warped = warp_cloud(PointCloud(points, validity), constant_flow(4, 4, 0.0, 1.0))
    # (0, 1) samples (1, 1) exactly; its right tap (1, 2) is invalid but has zero weight
    assert warped.validity[0, 1]
    np.testing.assert_array_equal(warped.points[0, 1], points[1, 1])


def test_range_map_of_zero_flow_is_one():
    coverage = range_map(FlowField.zeros(5, 6))
    np.testing.assert_array_equal(coverage, 1.0)


def test_occlusion_from_zero_flow_is_all_visible():
    assert estimate_occlusion(FlowField.zeros(5, 6)).values.all()


def test_occlusion_from_uniform_shift_marks_uncovered_border():
    # frame-2 pixel p came from p + (1, 0) in frame 1, so column 0 of frame 1 is never hit
    mask = estimate_occlusion(constant_flow(4, 6, 1.0, 0.0))
    assert not mask.values[:, 0].any()
    assert mask.values[:, 1:].all()


def test_occlusion_respects_threshold():
    flow = constant_flow(4, 6, 0.5, 0.0)
    coverage = range_map(flow)
    np.testing.assert_allclose(coverage[:, 0], 0.5)
    assert not estimate_occlusion(flow, threshold=0.75).values[:, 0].any()
    assert estimate_occlusion(flow, threshold=0.5).values[:, 0].all()


def test_range_map_total_mass_counts_in_raster_targets():
    flow = constant_flow(3, 3, 5.0, 0.0)
    assert range_map(flow).sum() == 0.0


def test_flow_magnitude_diff_is_euclidean():
    a = constant_flow(2, 2, 3.0, 4.0)
    np.testing.assert_array_equal(flow_magnitude_diff(a, FlowField.zeros(2, 2)), 5.0)


def test_flow_magnitude_diff_matches_pixel_loop(rng):
    a = FlowField(rng.normal(size=(4, 5, 2)))
    b = FlowField(rng.normal(size=(4, 5, 2)))
    out = flow_magnitude_diff(a, b)
    for y in range(4):
        for x in range(5):
            du = a.uv[y, x, 0] - b.uv[y, x, 0]
            dv = a.uv[y, x, 1] - b.uv[y, x, 1]
            assert out[y, x] == pytest.approx((du * du + dv * dv) ** 0.5, rel=1e-12)
