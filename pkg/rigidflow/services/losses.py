"""
Loss Service - Unsupervised Depth / Flow Objectives
===================================================
Every scalar loss used to supervise the optical flow, disparity and pose
estimates without labels:

    l_opt-ph   occlusion-aware photometric reconstruction of L1 via F_opt
    l_opt-sm   edge-weighted second-order flow smoothness on the moving region
    l_st       stereo loss (reconstruction + disparity smoothness + left-right)
    l_rig      photometric reconstruction via the rigid flows on the static region
    l_con      one-sided flow consistency with the refined rigid flow

    l_total = l_opt-ph + λ_sm·l_opt-sm + λ_st·l_st + λ_rig·(l_rig¹ + l_rig²) + λ_con·l_con

Pixel-level backward helpers (``*_grad``) live next to each term; the
dispatching ``gradient`` entry point is in ``gradients.py``.
"""
import logging
from dataclasses import dataclass

import numpy as np
from scipy.ndimage import binary_erosion, uniform_filter1d

from ..exceptions import InvalidParameterError, check_same_shape
from ..models import (DisparityMap, FlowField, Image, LossReport, LossWeights,
                      Mask, PoseSE3, SegmentationParams, StereoRig)
from .geometry import disparity_to_depth
from .rigid_alignment import rigid_flow
from .segmentation import motion_mask
from .warp import bilinear_warp, bilinear_warp_adjoint, bilinear_warp_flow_derivatives

logger = logging.getLogger(__name__)

SSIM_C1 = 0.01 ** 2
SSIM_C2 = 0.03 ** 2
STAGES = (1, 2, 3)


# ===== BOX FILTER & SSIM =====

def box_filter(values, window=3):
    """Uniform ``window``×``window`` mean over the first two axes, mirror padded."""
    out = uniform_filter1d(values, window, axis=0, mode='mirror')
    return uniform_filter1d(out, window, axis=1, mode='mirror')


def _axis_filter_adjoint(grad, window, axis):
    radius = window // 2
    if radius == 0:
        return grad.copy()
    size = grad.shape[axis]
    pad = [(0, 0)] * grad.ndim
    pad[axis] = (radius, radius)
    spread = uniform_filter1d(np.pad(grad, pad), window, axis=axis, mode='constant')
    spread = np.moveaxis(spread, axis, 0)
    out = spread[radius:radius + size].copy()
    # fold the mirrored pad back: index -s reads s, index n-1+s reads n-1-s
    for s in range(1, radius + 1):
        out[s] += spread[radius - s]
        out[size - 1 - s] += spread[radius + size - 1 + s]
    return np.moveaxis(out, 0, axis)


def box_filter_adjoint(grad, window=3):
    """Transpose of :func:`box_filter`."""
    return _axis_filter_adjoint(_axis_filter_adjoint(grad, window, 1), window, 0)


class _SsimStatistics:
    """Windowed moments of an (a, b) pair and the two SSIM factors."""

    def __init__(self, a, b, window):
        self.window = window
        self.mu_a = box_filter(a, window)
        self.mu_b = box_filter(b, window)
        self.var_a = box_filter(a * a, window) - self.mu_a ** 2
        self.var_b = box_filter(b * b, window) - self.mu_b ** 2
        self.cov = box_filter(a * b, window) - self.mu_a * self.mu_b
        self.luminance_num = 2.0 * self.mu_a * self.mu_b + SSIM_C1
        self.contrast_num = 2.0 * self.cov + SSIM_C2
        self.luminance_den = self.mu_a ** 2 + self.mu_b ** 2 + SSIM_C1
        self.contrast_den = self.var_a + self.var_b + SSIM_C2
        self.value = (self.luminance_num * self.contrast_num
                      / (self.luminance_den * self.contrast_den))

    def grad_b(self, a, b, upstream):
        """Backpropagate per-channel ``upstream = ∂L/∂SSIM`` onto ``b``."""
        den = self.luminance_den * self.contrast_den
        d_mean = (2.0 * self.mu_a * (self.contrast_num - self.luminance_num) / den
                  - self.value * (2.0 * self.mu_b / self.luminance_den
                                  - 2.0 * self.mu_b / self.contrast_den))
        d_square = -self.value / self.contrast_den
        d_cross = 2.0 * self.luminance_num / den
        return (box_filter_adjoint(upstream * d_mean, self.window)
                + 2.0 * b * box_filter_adjoint(upstream * d_square, self.window)
                + a * box_filter_adjoint(upstream * d_cross, self.window))


def ssim(a: Image, b: Image, window=3) -> np.ndarray:
    """
    Per-pixel structural similarity, channel averaged.

    Args:
        a, b: images of equal size and channel count
        window: odd box-window size

    Returns:
        H×W raster in [-1, 1]
    """
    check_same_shape(a.shape, b.shape, 'ssim operands', source='b')
    if a.num_channels != b.num_channels:
        raise InvalidParameterError("ssim operands need the same number of channels")
    return _SsimStatistics(a.channels, b.channels, window).value.mean(axis=2)


# ===== PHOTOMETRIC (Ψ) =====

def photometric_error(target: Image, recon: Image, alpha=0.85, window=3) -> np.ndarray:
    """Per-pixel ``α·(1 − SSIM)/2 + (1 − α)·mean_c |L1 − L̃1|``."""
    check_same_shape(target.shape, recon.shape, 'photometric operands', source='recon')
    error = (1.0 - alpha) * np.abs(target.channels - recon.channels).mean(axis=2)
    if alpha > 0:
        error = error + alpha * (1.0 - ssim(target, recon, window)) / 2.0
    return error


def photometric_loss(target: Image, recon: Image, weight, alpha=0.85, window=3) -> float:
    """
    Ψ(L1, L̃1, W): weighted mean of :func:`photometric_error`.

    An all-zero weight is allowed and yields 0 (logged as empty support).
    """
    weight = _as_weight(weight)
    check_same_shape(target.shape, weight.shape, 'photometric weight', source='weight')
    total = weight.sum()
    if total <= 0:
        logger.warning("⚠️ photometric loss has empty support, returning 0")
        return 0.0
    error = photometric_error(target, recon, alpha, window)
    return float(np.einsum('hw,hw->', error, weight) / total)


def photometric_recon_grad(target: Image, recon: Image, weight, alpha=0.85, window=3) -> np.ndarray:
    """∂Ψ/∂L̃1 as an H×W×C raster (zeros on empty support)."""
    weight = _as_weight(weight)
    total = weight.sum()
    channels = recon.num_channels
    if total <= 0:
        return np.zeros_like(recon.channels)
    share = (weight / total)[..., None] / channels
    diff = recon.channels - target.channels
    grad = (1.0 - alpha) * np.sign(diff) * share
    if alpha > 0:
        stats = _SsimStatistics(target.channels, recon.channels, window)
        upstream = np.broadcast_to(-0.5 * alpha * share, recon.channels.shape)
        grad = grad + stats.grad_b(target.channels, recon.channels, upstream)
    return grad


def reconstruction_weight(mask, in_bounds: Mask, alpha=0.85, window=3) -> np.ndarray:
    """
    Support of Ψ for a warped reconstruction: ``mask ∧ in_bounds``, with
    in_bounds eroded by the SSIM radius when SSIM is active.
    """
    support = in_bounds.values
    if alpha > 0 and window > 1:
        support = binary_erosion(support, structure=np.ones((window, window), dtype=bool),
                                 border_value=1)
    return _as_weight(mask) * support


def _as_weight(weight):
    if isinstance(weight, Mask):
        return weight.as_float()
    return np.asarray(weight, dtype=np.float64)


# ===== FLOW SMOOTHNESS =====

def _interior(values, axis, offset):
    """View of the interior along ``axis``, shifted by ``offset`` ∈ {-1, 0, 1}."""
    size = values.shape[axis]
    index = [slice(None)] * values.ndim
    index[axis] = slice(1 + offset, size - 1 + offset)
    return values[tuple(index)]


def _second_order_terms(flow: FlowField, image: Image, region, beta):
    """Yield (axis, second difference, edge·region weight) for x and y."""
    region = _as_weight(region)
    for axis in (1, 0):
        if flow.uv.shape[axis] < 3:
            continue
        second = (_interior(flow.uv, axis, -1) - 2.0 * _interior(flow.uv, axis, 0)
                  + _interior(flow.uv, axis, 1))
        gradient = (_interior(image.channels, axis, 1) - _interior(image.channels, axis, -1)) / 2.0
        edge = np.exp(-beta * np.abs(gradient).mean(axis=2))
        yield axis, second, edge * _interior(region, axis, 0)


def smoothness_loss(flow: FlowField, image: Image, region, beta=10.0) -> float:
    """
    Edge-aware second-order flow smoothness,
    ``(1/HW)·Σ_d Σ_{u,v} |∂²_d F|·exp(−β·|∂_d L1|)·M``; border pixels of each
    direction are excluded.
    """
    check_same_shape(flow.shape, image.shape, 'flow vs image', source='image')
    height, width = flow.shape
    total = 0.0
    for _, second, weight in _second_order_terms(flow, image, region, beta):
        total += np.einsum('hwc,hw->', np.abs(second), weight)
    return float(total / (height * width))


def smoothness_flow_grad(flow: FlowField, image: Image, region, beta=10.0) -> np.ndarray:
    height, width = flow.shape
    grad = np.zeros_like(flow.uv)
    for axis, second, weight in _second_order_terms(flow, image, region, beta):
        upstream = np.sign(second) * (weight / (height * width))[..., None]
        _interior(grad, axis, -1)[...] += upstream
        _interior(grad, axis, 0)[...] -= 2.0 * upstream
        _interior(grad, axis, 1)[...] += upstream
    return grad


# ===== CONSISTENCY =====

def consistency_loss(f_opt: FlowField, f_rig_refined: FlowField, moving) -> float:
    """``(1/HW)·Σ |F_opt − SG(F_rig')|₁ · (1 − M1)``."""
    check_same_shape(f_opt.shape, f_rig_refined.shape, 'flow vs rigid flow', source='f_rig_refined')
    static = 1.0 - _as_weight(moving)
    height, width = f_opt.shape
    diff = np.abs(f_opt.uv - f_rig_refined.uv)
    return float(np.einsum('hwc,hw->', diff, static) / (height * width))


def consistency_flow_grad(f_opt: FlowField, f_rig_refined: FlowField, moving) -> np.ndarray:
    static = 1.0 - _as_weight(moving)
    height, width = f_opt.shape
    return np.sign(f_opt.uv - f_rig_refined.uv) * (static / (height * width))[..., None]


# ===== STEREO =====

def _disparity_values(disp: DisparityMap):
    return np.where(disp.validity, disp.values, 0.0)


def _horizontal_flow(values, sign):
    return FlowField(np.stack([sign * values, np.zeros_like(values)], axis=2))


class StereoTerms:
    """
    Components of the stereo loss for one rectified pair.

    Left pixel x corresponds to right pixel x − d_L; right pixel x to left
    pixel x + d_R.
    """

    def __init__(self, left: Image, right: Image, disp_left: DisparityMap, disp_right: DisparityMap,
                 alpha=0.85, window=3):
        check_same_shape(left.shape, right.shape, 'left vs right image', source='right')
        check_same_shape(left.shape, disp_left.shape, 'image vs left disparity', source='disp_left')
        check_same_shape(left.shape, disp_right.shape, 'image vs right disparity', source='disp_right')
        self.left, self.right = left, right
        self.alpha, self.window = alpha, window
        self.d_left = _disparity_values(disp_left)
        self.d_right = _disparity_values(disp_right)
        self.valid_left = disp_left.validity
        self.valid_right = disp_right.validity
        self.flow_left = _horizontal_flow(self.d_left, -1.0)
        self.flow_right = _horizontal_flow(self.d_right, 1.0)

        recon, in_bounds = bilinear_warp(right.channels, self.flow_left)
        self.recon_left = Image(np.clip(recon, 0.0, 1.0))
        self.weight_left = reconstruction_weight(self.valid_left, Mask(in_bounds.values), alpha, window)
        recon, in_bounds = bilinear_warp(left.channels, self.flow_right)
        self.recon_right = Image(np.clip(recon, 0.0, 1.0))
        self.weight_right = reconstruction_weight(self.valid_right, Mask(in_bounds.values), alpha, window)

        sampled, in_bounds = bilinear_warp(self.d_right, self.flow_left)
        self.lr_left = self.d_left - sampled
        self.lr_weight_left = (in_bounds.values & self.valid_left).astype(np.float64)
        sampled, in_bounds = bilinear_warp(self.d_left, self.flow_right)
        self.lr_right = self.d_right - sampled
        self.lr_weight_right = (in_bounds.values & self.valid_right).astype(np.float64)

    # ---- values ----

    def reconstruction(self):
        return (photometric_loss(self.left, self.recon_left, self.weight_left, self.alpha, self.window)
                + photometric_loss(self.right, self.recon_right, self.weight_right, self.alpha, self.window))

    @staticmethod
    def _disparity_smoothness(disparity, image: Image):
        total = 0.0
        for axis in (1, 0):
            if disparity.shape[axis] < 2:
                continue
            step = np.diff(disparity, axis=axis)
            edge = np.exp(-np.abs(np.diff(image.channels, axis=axis)).mean(axis=2))
            total += float(np.einsum('hw,hw->', np.abs(step), edge) / step.size)
        return total

    def smoothness(self):
        return (self._disparity_smoothness(self.d_left, self.left)
                + self._disparity_smoothness(self.d_right, self.right))

    @staticmethod
    def _weighted_mean_abs(residual, weight):
        total = weight.sum()
        if total <= 0:
            return 0.0
        return float(np.einsum('hw,hw->', np.abs(residual), weight) / total)

    def left_right(self):
        return (self._weighted_mean_abs(self.lr_left, self.lr_weight_left)
                + self._weighted_mean_abs(self.lr_right, self.lr_weight_right))

    def total(self, component_weights=(1.0, 0.1, 1.0)):
        w_rec, w_sm, w_lr = component_weights
        return w_rec * self.reconstruction() + w_sm * self.smoothness() + w_lr * self.left_right()

    # ---- gradients ----

    def disparity_grads(self, component_weights=(1.0, 0.1, 1.0)):
        """(∂l_st/∂d_L, ∂l_st/∂d_R) as H×W rasters."""
        w_rec, w_sm, w_lr = component_weights
        grad_left = np.zeros_like(self.d_left)
        grad_right = np.zeros_like(self.d_right)

        # reconstruction: the sample position moves with -d_L (left) and +d_R (right)
        g_recon = photometric_recon_grad(self.left, self.recon_left, self.weight_left, self.alpha, self.window)
        du, _ = bilinear_warp_flow_derivatives(self.right.channels, self.flow_left)
        grad_left -= w_rec * np.einsum('hwc,hwc->hw', g_recon, du)
        g_recon = photometric_recon_grad(self.right, self.recon_right, self.weight_right, self.alpha, self.window)
        du, _ = bilinear_warp_flow_derivatives(self.left.channels, self.flow_right)
        grad_right += w_rec * np.einsum('hwc,hwc->hw', g_recon, du)

        grad_left += w_sm * self._smoothness_grad(self.d_left, self.left)
        grad_right += w_sm * self._smoothness_grad(self.d_right, self.right)

        for residual, weight, own, other, flow, own_grad, other_grad, sign in (
                (self.lr_left, self.lr_weight_left, self.d_left, self.d_right,
                 self.flow_left, grad_left, grad_right, -1.0),
                (self.lr_right, self.lr_weight_right, self.d_right, self.d_left,
                 self.flow_right, grad_right, grad_left, 1.0)):
            total = weight.sum()
            if total <= 0:
                continue
            upstream = w_lr * np.sign(residual) * weight / total
            du, _ = bilinear_warp_flow_derivatives(other, flow)
            own_grad += upstream * (1.0 - sign * du)
            other_grad -= bilinear_warp_adjoint(upstream, flow)
        return grad_left, grad_right

    @staticmethod
    def _smoothness_grad(disparity, image: Image):
        grad = np.zeros_like(disparity)
        for axis in (1, 0):
            if disparity.shape[axis] < 2:
                continue
            step = np.diff(disparity, axis=axis)
            edge = np.exp(-np.abs(np.diff(image.channels, axis=axis)).mean(axis=2))
            upstream = np.sign(step) * edge / step.size
            if axis == 1:
                grad[:, 1:] += upstream
                grad[:, :-1] -= upstream
            else:
                grad[1:, :] += upstream
                grad[:-1, :] -= upstream
        return grad


def stereo_loss(left: Image, right: Image, disp_left: DisparityMap, disp_right: DisparityMap,
                alpha=0.85, component_weights=(1.0, 0.1, 1.0), window=3) -> float:
    """Stereo loss: weighted reconstruction + disparity smoothness + left-right consistency."""
    return StereoTerms(left, right, disp_left, disp_right, alpha, window).total(component_weights)


# ===== RIGID RECONSTRUCTION =====

def rigid_static_weight(non_occluded, moving) -> np.ndarray:
    """``O1 · (1 − M1)``."""
    return _as_weight(non_occluded) * (1.0 - _as_weight(moving))


def rigid_loss(l1: Image, recon_rig: Image, recon_rig_refined: Image, non_occluded, moving,
               alpha=0.85, window=3, support=None, support_refined=None):
    """
    Rigid reconstruction terms on the static region.

    Args:
        support / support_refined: optional extra per-pixel supports
            (in-bounds and rigid-flow validity) of each reconstruction

    Returns:
        (rig1, rig2)
    """
    static = rigid_static_weight(non_occluded, moving)
    weight1 = static if support is None else static * _as_weight(support)
    weight2 = static if support_refined is None else static * _as_weight(support_refined)
    return (photometric_loss(l1, recon_rig, weight1, alpha, window),
            photometric_loss(l1, recon_rig_refined, weight2, alpha, window))


# ===== TOTAL LOSS =====

def weighted_total(opt_ph, opt_sm, stereo, rig1, rig2, con, weights: LossWeights):
    return (opt_ph + weights.lambda_sm * opt_sm + weights.lambda_st * stereo
            + weights.lambda_rig * (rig1 + rig2) + weights.lambda_con * con)


@dataclass(frozen=True, eq=False)
class LossInputs:
    """
    Everything the loss suite reads for one training sample.

    ``flow_rig`` / ``flow_rig_refined`` override the rigid flows synthesized
    from ``disp_left`` and ``pose`` / ``pose_refined``. ``non_occluded``
    defaults to all visible; ``moving`` defaults to the motion mask of the
    optical flow against the refined rigid flow.
    """

    l1: Image
    l2: Image
    r1: Image
    flow_opt: FlowField
    disp_left: DisparityMap
    disp_right: DisparityMap
    pose: PoseSE3
    rig: StereoRig
    non_occluded: Mask = None
    moving: Mask = None
    pose_refined: PoseSE3 = None
    flow_rig: FlowField = None
    flow_rig_refined: FlowField = None

    def __post_init__(self):
        shape = self.rig.intrinsics.shape
        for name in ('l1', 'l2', 'r1', 'flow_opt', 'disp_left', 'disp_right',
                     'non_occluded', 'moving', 'flow_rig', 'flow_rig_refined'):
            value = getattr(self, name)
            if value is not None:
                check_same_shape(shape, value.shape, f'{name} vs intrinsics', source=name)

    def depth1(self):
        return disparity_to_depth(self.disp_left, self.rig)

    def rigid(self):
        """(F_rig, validity) from the initial pose."""
        if self.flow_rig is not None:
            return self.flow_rig, Mask.full(*self.flow_rig.shape)
        return rigid_flow(self.depth1(), self.pose, self.rig.intrinsics)

    def rigid_refined(self):
        """(F_rig', validity); falls back to the initial rigid flow."""
        if self.flow_rig_refined is not None:
            return self.flow_rig_refined, Mask.full(*self.flow_rig_refined.shape)
        if self.pose_refined is not None:
            return rigid_flow(self.depth1(), self.pose_refined, self.rig.intrinsics)
        return self.rigid()

    def visible(self):
        if self.non_occluded is not None:
            return self.non_occluded
        return Mask.full(*self.rig.intrinsics.shape)

    def moving_mask(self, stage=3, delta=3.0):
        """M1 for a training stage: all ones in stage 1, all zeros in stage 2."""
        height, width = self.rig.intrinsics.shape
        if stage == 1:
            return Mask.full(height, width, True)
        if stage == 2:
            return Mask.full(height, width, False)
        if self.moving is not None:
            return self.moving
        flow, _ = self.rigid_refined()
        return motion_mask(self.flow_opt, flow, self.visible(), SegmentationParams(delta))


class LossEvaluator:
    """Evaluates the loss suite for one sample under a weight set."""

    def __init__(self, weights: LossWeights = None):
        self.weights = weights or LossWeights()

    def _warped_term(self, target, source, flow, mask):
        recon, in_bounds = bilinear_warp(source.channels, flow)
        weight = reconstruction_weight(mask, in_bounds, self.weights.alpha, self.weights.ssim_window)
        value = photometric_loss(target, Image(np.clip(recon, 0.0, 1.0)), weight,
                                 self.weights.alpha, self.weights.ssim_window)
        return value, int(np.count_nonzero(weight))

    def evaluate(self, inputs: LossInputs, stage=3) -> LossReport:
        if stage not in STAGES:
            raise InvalidParameterError(f"stage must be one of {STAGES} (got {stage})")
        w = self.weights
        visible = inputs.visible().as_float()
        moving = inputs.moving_mask(stage, w.delta).as_float()
        static = 1.0 - moving
        counts = {}
        terms = dict.fromkeys(('opt_ph', 'opt_sm', 'stereo', 'rig1', 'rig2', 'con'), 0.0)

        if stage in (1, 3):
            terms['opt_ph'], counts['opt_ph'] = self._warped_term(inputs.l1, inputs.l2, inputs.flow_opt, visible)
            terms['opt_sm'] = smoothness_loss(inputs.flow_opt, inputs.l1, moving, w.beta)
            counts['opt_sm'] = int(moving.sum())

        if stage in (2, 3):
            stereo = StereoTerms(inputs.l1, inputs.r1, inputs.disp_left, inputs.disp_right,
                                 w.alpha, w.ssim_window)
            terms['stereo'] = stereo.total(w.stereo_weights)
            counts['stereo'] = int(np.count_nonzero(stereo.weight_left) + np.count_nonzero(stereo.weight_right))
            flow_rig, valid_rig = inputs.rigid()
            terms['rig1'], counts['rig1'] = self._warped_term(
                inputs.l1, inputs.l2, flow_rig, rigid_static_weight(visible, moving) * valid_rig.as_float())

        if stage == 3:
            flow_refined, valid_refined = inputs.rigid_refined()
            terms['rig2'], counts['rig2'] = self._warped_term(
                inputs.l1, inputs.l2, flow_refined, rigid_static_weight(visible, moving) * valid_refined.as_float())
            terms['con'] = consistency_loss(inputs.flow_opt, flow_refined, moving)
            counts['con'] = int(static.sum())

        empty = [name for name in ('opt_ph', 'rig1', 'rig2') if name in counts and counts[name] == 0]
        total = weighted_total(weights=w, **terms)
        logger.info(f"stage {stage} loss: total={total:.6f}")
        return LossReport(total=total, counts=counts, empty_support=empty, stage=stage, **terms)


def total_loss(inputs: LossInputs, weights: LossWeights = None) -> LossReport:
    """Full weighted loss with every term active."""
    return LossEvaluator(weights).evaluate(inputs, stage=3)


def stage_loss(inputs: LossInputs, stage, weights: LossWeights = None) -> LossReport:
    """
    Loss of one training stage; inactive terms are reported as 0.

    Args:
        stage: 1 (flow only, M1 ≡ 1), 2 (stereo + rigid, M1 ≡ 0) or 3 (all)
    """
    return LossEvaluator(weights).evaluate(inputs, stage=stage)
