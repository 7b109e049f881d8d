"""
Tests for the color-wheel flow rendering.
"""
import numpy as np

from rigidflow.models import FlowField, Mask
from rigidflow.services.flow_viz import flow_to_color, make_color_wheel


def leftward(magnitudes):
    uv = np.zeros((1, len(magnitudes), 2))
    uv[0, :, 0] = -np.asarray(magnitudes, dtype=float)
    return FlowField(uv)


def test_color_wheel_table():
    wheel = make_color_wheel()
    assert wheel.shape == (55, 3)
    assert wheel.min() >= 0.0 and wheel.max() <= 1.0
    np.testing.assert_array_equal(wheel[0], [1.0, 0.0, 0.0])


def test_zero_flow_is_white():
    color = flow_to_color(FlowField.zeros(3, 4)).channels
    np.testing.assert_array_equal(color, 1.0)


def test_invalid_pixels_are_black():
    validity = Mask(np.array([[True, False, True]]))
    color = flow_to_color(leftward([1.0, 5.0, 2.0]), validity).channels
    np.testing.assert_array_equal(color[0, 1], 0.0)
    assert color[0, 0].max() > 0.0


def test_largest_valid_magnitude_is_fully_saturated():
    color = flow_to_color(leftward([1.0, 2.0])).channels
    np.testing.assert_allclose(color[0, 1], [0.0, 1.0, 0.5])
    np.testing.assert_allclose(color[0, 0], [0.5, 1.0, 0.75])


def test_explicit_normalizer():
    color = flow_to_color(leftward([1.0]), max_magnitude=2.0).channels
    np.testing.assert_allclose(color[0, 0], [0.5, 1.0, 0.75])
    # magnitudes past the normalizer clip to the rim
    color = flow_to_color(leftward([4.0]), max_magnitude=2.0).channels
    np.testing.assert_allclose(color[0, 0], [0.0, 1.0, 0.5])
