"""
Warp Service - Bilinear Sampling & Occlusion Estimation
=======================================================
Backward warping of rasters along a flow field with the bilinear kernel
``max(0, 1-|m-(i+u)|) · max(0, 1-|n-(j+v)|)``, its adjoint (splatting), and
the range-map occlusion estimate from the reverse flow.
"""
import logging

import numpy as np

from ..exceptions import check_same_shape
from ..models import FlowField, Image, Mask, PointCloud
from .geometry import MIN_DEPTH, pixel_grid

logger = logging.getLogger(__name__)

DEFAULT_OCCLUSION_THRESHOLD = 0.75
# meters
DEFAULT_PLANAR_TOLERANCE = 1e-3


class BilinearStencil:
    """
    The four kernel taps of every sample position ``p + flow(p)``.

    Taps are ordered (x0,y0), (x0+1,y0), (x0,y0+1), (x0+1,y0+1). Taps that
    fall outside the raster keep their weight but are flagged in ``inside``
    and contribute zero.
    """

    def __init__(self, flow: FlowField):
        height, width = flow.shape
        self.height, self.width = height, width
        xs, ys = pixel_grid(height, width)
        self.sx = xs + flow.u
        self.sy = ys + flow.v
        x0 = np.floor(self.sx)
        y0 = np.floor(self.sy)
        self.ax = self.sx - x0
        self.ay = self.sy - y0
        x0 = x0.astype(np.int64)
        y0 = y0.astype(np.int64)
        self.tap_x = (x0, x0 + 1, x0, x0 + 1)
        self.tap_y = (y0, y0, y0 + 1, y0 + 1)
        self.weights = (
            (1.0 - self.ax) * (1.0 - self.ay),
            self.ax * (1.0 - self.ay),
            (1.0 - self.ax) * self.ay,
            self.ax * self.ay,
        )
        self.inside = tuple(
            (tx >= 0) & (tx < width) & (ty >= 0) & (ty < height)
            for tx, ty in zip(self.tap_x, self.tap_y)
        )
        self.in_bounds = ((self.sx > -1.0) & (self.sx < width)
                          & (self.sy > -1.0) & (self.sy < height))

    def flat_index(self, tap):
        tx = np.clip(self.tap_x[tap], 0, self.width - 1)
        ty = np.clip(self.tap_y[tap], 0, self.height - 1)
        return ty * self.width + tx

    def gather(self, source):
        """Tap values of an H×W×C source, zero outside the raster."""
        flat = source.reshape(self.height * self.width, -1)
        taps = []
        for tap in range(4):
            values = flat[self.flat_index(tap)]
            taps.append(np.where(self.inside[tap][..., None], values, 0.0))
        return taps

    def sample(self, source):
        taps = self.gather(source)
        out = self.weights[0][..., None] * taps[0]
        for tap in range(1, 4):
            out = out + self.weights[tap][..., None] * taps[tap]
        return out

    def flow_derivatives(self, source):
        """∂sample/∂u and ∂sample/∂v for every channel (piecewise-linear kernel)."""
        t00, t10, t01, t11 = self.gather(source)
        ax = self.ax[..., None]
        ay = self.ay[..., None]
        du = (1.0 - ay) * (t10 - t00) + ay * (t11 - t01)
        dv = (1.0 - ax) * (t01 - t00) + ax * (t11 - t10)
        return du, dv

    def splat(self, values):
        """
        Adjoint of :meth:`sample`: scatter H×W×C values onto the taps.
        Accumulation runs in raster-scan order per tap, so it is deterministic.
        """
        channels = values.shape[2]
        size = self.height * self.width
        out = np.zeros((size, channels))
        for tap in range(4):
            index = self.flat_index(tap).reshape(-1)
            weight = np.where(self.inside[tap], self.weights[tap], 0.0).reshape(-1)
            for c in range(channels):
                out[:, c] += np.bincount(index, weights=weight * values[..., c].reshape(-1),
                                         minlength=size)
        return out.reshape(self.height, self.width, channels)


def _as_channels(source):
    source = np.asarray(source, dtype=np.float64)
    return (source[..., None], True) if source.ndim == 2 else (source, False)


def bilinear_warp(source, flow: FlowField):
    """
    Sample ``source`` at ``p + flow(p)`` for every pixel p.

    Args:
        source: H×W or H×W×C raster
        flow: displacement field of the same H×W

    Returns:
        (warped raster with the source's shape, in_bounds Mask); samples whose
        kernel support lies fully outside the raster are 0 with in_bounds 0.
    """
    channels, squeeze = _as_channels(source)
    check_same_shape(flow.shape, channels.shape, 'source vs flow', source='source')
    stencil = BilinearStencil(flow)
    out = stencil.sample(channels)
    return (out[..., 0] if squeeze else out), Mask(stencil.in_bounds)


def bilinear_warp_adjoint(grad_out, flow: FlowField):
    """Gradient of ``sum(grad_out · bilinear_warp(source, flow))`` w.r.t. source."""
    channels, squeeze = _as_channels(grad_out)
    out = BilinearStencil(flow).splat(channels)
    return out[..., 0] if squeeze else out


def bilinear_warp_flow_derivatives(source, flow: FlowField):
    """Per-pixel derivatives of the warped raster w.r.t. the flow's u and v."""
    channels, squeeze = _as_channels(source)
    du, dv = BilinearStencil(flow).flow_derivatives(channels)
    if squeeze:
        return du[..., 0], dv[..., 0]
    return du, dv


def warp_image(image: Image, flow: FlowField):
    """Reconstruct frame 1 from ``image`` (frame 2) along ``flow``."""
    warped, in_bounds = bilinear_warp(image.channels, flow)
    return Image(warped), in_bounds


def _planar_sample(stencil: BilinearStencil, points, usable):
    """
    Resample a cloud as if every kernel cell were a plane: inverse depth and
    the viewing ray are both affine in the pixel grid there, so they are
    interpolated separately and recombined.
    """
    z = points[..., 2]
    inverse = np.where(usable, 1.0 / np.where(usable, z, 1.0), 0.0)
    rays = points * inverse[..., None]
    inverse = stencil.sample(inverse[..., None])
    rays = stencil.sample(rays)
    return rays / np.where(inverse > 0, inverse, 1.0)


def warp_cloud(cloud2: PointCloud, flow12: FlowField,
               planar_tolerance=DEFAULT_PLANAR_TOLERANCE) -> PointCloud:
    """
    Bring frame-2 points back onto the frame-1 pixel grid (Q̃1).

    Coordinates are bilinear samples of the three point channels. A warped
    point is valid when the sample is in bounds, every tap with a non-zero
    weight is inside the raster, valid in ``cloud2`` and in front of the
    camera, and the sample lies within ``planar_tolerance`` meters of the
    plane-exact resample of the same taps. The last test drops points whose
    taps straddle a depth discontinuity or a steep depth slope.
    """
    check_same_shape(flow12.shape, cloud2.shape, 'cloud vs flow', source='cloud2')
    stencil = BilinearStencil(flow12)
    usable = cloud2.validity & (cloud2.points[..., 2] > MIN_DEPTH)
    points = np.where(usable[..., None], cloud2.points, 0.0)
    warped = stencil.sample(points)
    validity = stencil.in_bounds.copy()
    flat_usable = usable.reshape(-1)
    for tap in range(4):
        used = stencil.weights[tap] > 0
        tap_ok = stencil.inside[tap] & flat_usable[stencil.flat_index(tap)]
        validity &= ~used | tap_ok

    deviation = np.linalg.norm(warped - _planar_sample(stencil, points, usable), axis=2)
    planar = validity & (deviation <= planar_tolerance)
    dropped = int(validity.sum() - planar.sum())
    if dropped:
        logger.debug(f"cloud warp: {dropped} samples off the local surface plane dropped")
    warped = np.where(planar[..., None], warped, 0.0)
    return PointCloud(warped, planar)


def range_map(flow21: FlowField) -> np.ndarray:
    """
    Splat unit mass from every frame-2 pixel to ``p + F21(p)`` in frame 1.
    Targets outside the raster are dropped.
    """
    stencil = BilinearStencil(flow21)
    ones = np.ones(flow21.shape + (1,))
    return stencil.splat(ones)[..., 0]


def estimate_occlusion(flow21: FlowField, threshold=DEFAULT_OCCLUSION_THRESHOLD) -> Mask:
    """
    Non-occlusion mask O1: frame-1 pixels covered by at least ``threshold``
    of splatted reverse-flow mass.
    """
    coverage = range_map(flow21)
    mask = Mask(coverage >= threshold)
    logger.debug(f"occlusion estimate: {coverage.size - mask.count()} of {coverage.size} pixels occluded")
    return mask


def flow_magnitude_diff(a: FlowField, b: FlowField) -> np.ndarray:
    """Per-pixel Euclidean norm of ``a - b``."""
    check_same_shape(a.shape, b.shape, 'flow vs flow', source='flow')
    diff = a.uv - b.uv
    return np.sqrt(diff[..., 0] ** 2 + diff[..., 1] ** 2)
