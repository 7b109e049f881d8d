"""
Flow Visualization - Middlebury Color Wheel
===========================================
Hue encodes flow direction, saturation encodes magnitude relative to the
largest magnitude in the field.
"""
import logging

import numpy as np

from ..models import FlowField, Image, Mask

logger = logging.getLogger(__name__)

# hue segments: red-yellow, yellow-green, green-cyan, cyan-blue, blue-magenta, magenta-red
WHEEL_SEGMENTS = (15, 6, 4, 11, 13, 6)


def make_color_wheel():
    """(55, 3) table of RGB values in [0, 1] around the wheel."""
    ry, yg, gc, cb, bm, mr = WHEEL_SEGMENTS
    wheel = np.zeros((sum(WHEEL_SEGMENTS), 3))
    col = 0
    wheel[col:col + ry, 0] = 1.0
    wheel[col:col + ry, 1] = np.arange(ry) / ry
    col += ry
    wheel[col:col + yg, 0] = 1.0 - np.arange(yg) / yg
    wheel[col:col + yg, 1] = 1.0
    col += yg
    wheel[col:col + gc, 1] = 1.0
    wheel[col:col + gc, 2] = np.arange(gc) / gc
    col += gc
    wheel[col:col + cb, 1] = 1.0 - np.arange(cb) / cb
    wheel[col:col + cb, 2] = 1.0
    col += cb
    wheel[col:col + bm, 2] = 1.0
    wheel[col:col + bm, 0] = np.arange(bm) / bm
    col += bm
    wheel[col:col + mr, 2] = 1.0 - np.arange(mr) / mr
    wheel[col:col + mr, 0] = 1.0
    return wheel


def flow_to_color(flow: FlowField, validity: Mask = None, max_magnitude=None) -> Image:
    """
    Render a flow field as an RGB image.

    Args:
        flow: flow to render
        validity: invalid pixels are drawn black
        max_magnitude: normalizer; defaults to the largest valid magnitude

    Returns:
        Image with 3 channels
    """
    valid = np.ones(flow.shape, dtype=bool) if validity is None else validity.values
    u = np.where(valid, flow.u, 0.0)
    v = np.where(valid, flow.v, 0.0)
    magnitude = np.sqrt(u ** 2 + v ** 2)
    if max_magnitude is None:
        max_magnitude = float(magnitude.max()) if magnitude.size else 0.0
    if max_magnitude > 0:
        u = u / max_magnitude
        v = v / max_magnitude
    radius = np.minimum(np.sqrt(u ** 2 + v ** 2), 1.0)

    wheel = make_color_wheel()
    ncols = wheel.shape[0]
    angle = np.arctan2(-v, -u) / np.pi
    position = (angle + 1.0) / 2.0 * (ncols - 1)
    k0 = np.floor(position).astype(np.int64)
    k1 = (k0 + 1) % ncols
    fraction = (position - k0)[..., None]
    color = (1.0 - fraction) * wheel[k0] + fraction * wheel[k1]
    color = 1.0 - radius[..., None] * (1.0 - color)
    color = np.where(valid[..., None], color, 0.0)
    logger.debug(f"flow visualization normalized by {max_magnitude:.3f} px")
    return Image(np.clip(color, 0.0, 1.0))
