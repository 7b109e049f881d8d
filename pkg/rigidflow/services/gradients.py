"""
Gradient Service - Analytic Partials of the Loss Suite
======================================================
Hand-derived derivatives for the (loss, input) pairs that carry gradient
during training:

    photometric   / flow_opt
    smoothness    / flow_opt
    consistency   / flow_opt, flow_rig_refined (stop-gradient: always zero)
    stereo        / disp_left, disp_right
    rigid         / flow_rig, pose (6-dof, through the rigid flow)
    rigid_refined / flow_rig_refined

The refined rigid reconstruction has no path back to the pose because the
alignment module is not differentiable. Masks (O1, M1, in-bounds and
validity supports) are treated as constants.
"""
import logging

import numpy as np

from ..exceptions import UnsupportedGradientError
from ..models import GradientBundle, Image, LossInput, LossTerm, LossWeights
from .geometry import backproject, pose_to_6dof, so3_right_jacobian, transform
from .losses import (LossInputs, StereoTerms, consistency_flow_grad, consistency_loss,
                     photometric_loss, photometric_recon_grad, reconstruction_weight,
                     rigid_static_weight, smoothness_flow_grad, smoothness_loss)
from .rigid_alignment import rigid_flow
from .warp import bilinear_warp, bilinear_warp_flow_derivatives

logger = logging.getLogger(__name__)


class GradientEngine:
    """Dispatches ``(loss, input)`` pairs to their analytic derivative."""

    def __init__(self, inputs: LossInputs, weights: LossWeights = None):
        self.inputs = inputs
        self.weights = weights or LossWeights()
        self._handlers = {
            (LossTerm.PHOTOMETRIC, LossInput.FLOW_OPT): self._photometric_flow,
            (LossTerm.SMOOTHNESS, LossInput.FLOW_OPT): self._smoothness_flow,
            (LossTerm.CONSISTENCY, LossInput.FLOW_OPT): self._consistency_flow,
            (LossTerm.CONSISTENCY, LossInput.FLOW_RIG_REFINED): self._consistency_rigid,
            (LossTerm.STEREO, LossInput.DISP_LEFT): self._stereo_left,
            (LossTerm.STEREO, LossInput.DISP_RIGHT): self._stereo_right,
            (LossTerm.RIGID, LossInput.FLOW_RIG): self._rigid_flow,
            (LossTerm.RIGID, LossInput.POSE): self._rigid_pose,
            (LossTerm.RIGID_REFINED, LossInput.FLOW_RIG_REFINED): self._rigid_refined_flow,
        }

    @staticmethod
    def supported_pairs():
        return [(loss.value, wrt.value) for loss, wrt in GradientEngine(None)._handlers]

    def compute(self, loss, wrt) -> GradientBundle:
        loss = _as_enum(LossTerm, loss)
        wrt = _as_enum(LossInput, wrt)
        handler = self._handlers.get((loss, wrt))
        if handler is None:
            if loss is LossTerm.RIGID_REFINED and wrt is LossInput.POSE:
                message = "rigid_refined has no gradient w.r.t. pose: the alignment module is not differentiable"
            else:
                message = f"no analytic gradient for {loss.value} w.r.t. {wrt.value}"
            raise UnsupportedGradientError(message, source=wrt.value)
        value, partial = handler()
        if not np.all(np.isfinite(partial)):
            logger.warning(f"⚠️ non-finite entries in d{loss.value}/d{wrt.value}")
        return GradientBundle(loss=loss, value=float(value), partials={wrt.value: partial})

    # ===== shared pieces =====

    def _moving(self):
        return self.inputs.moving_mask(3, self.weights.delta).as_float()

    def _visible(self):
        return self.inputs.visible().as_float()

    def _warped_photometric(self, flow, mask):
        """Ψ(L1, warp(L2, flow), mask ∧ support) and ∂/∂flow (H×W×2)."""
        w = self.weights
        recon, in_bounds = bilinear_warp(self.inputs.l2.channels, flow)
        recon = Image(np.clip(recon, 0.0, 1.0))
        weight = reconstruction_weight(mask, in_bounds, w.alpha, w.ssim_window)
        value = photometric_loss(self.inputs.l1, recon, weight, w.alpha, w.ssim_window)
        g_recon = photometric_recon_grad(self.inputs.l1, recon, weight, w.alpha, w.ssim_window)
        du, dv = bilinear_warp_flow_derivatives(self.inputs.l2.channels, flow)
        partial = np.stack([np.einsum('hwc,hwc->hw', g_recon, du),
                            np.einsum('hwc,hwc->hw', g_recon, dv)], axis=2)
        return value, partial

    # ===== handlers =====

    def _photometric_flow(self):
        return self._warped_photometric(self.inputs.flow_opt, self._visible())

    def _smoothness_flow(self):
        moving = self._moving()
        args = (self.inputs.flow_opt, self.inputs.l1, moving, self.weights.beta)
        return smoothness_loss(*args), smoothness_flow_grad(*args)

    def _consistency_flow(self):
        refined, _ = self.inputs.rigid_refined()
        moving = self._moving()
        return (consistency_loss(self.inputs.flow_opt, refined, moving),
                consistency_flow_grad(self.inputs.flow_opt, refined, moving))

    def _consistency_rigid(self):
        refined, _ = self.inputs.rigid_refined()
        value = consistency_loss(self.inputs.flow_opt, refined, self._moving())
        return value, np.zeros_like(refined.uv)

    def _stereo_terms(self):
        w = self.weights
        return StereoTerms(self.inputs.l1, self.inputs.r1, self.inputs.disp_left,
                           self.inputs.disp_right, w.alpha, w.ssim_window)

    def _stereo_left(self):
        terms = self._stereo_terms()
        grad_left, _ = terms.disparity_grads(self.weights.stereo_weights)
        return terms.total(self.weights.stereo_weights), grad_left

    def _stereo_right(self):
        terms = self._stereo_terms()
        _, grad_right = terms.disparity_grads(self.weights.stereo_weights)
        return terms.total(self.weights.stereo_weights), grad_right

    def _rigid_flow(self):
        flow, validity = self.inputs.rigid()
        mask = rigid_static_weight(self._visible(), self._moving()) * validity.as_float()
        return self._warped_photometric(flow, mask)

    def _rigid_refined_flow(self):
        flow, validity = self.inputs.rigid_refined()
        mask = rigid_static_weight(self._visible(), self._moving()) * validity.as_float()
        return self._warped_photometric(flow, mask)

    def _rigid_pose(self):
        """
        Chain rule through ``F = project(R·X + t) − p`` with the pose
        parametrized as (t, ω), ``R = exp(ω)``:

            ∂Y/∂t = I,  ∂Y/∂ω = −R·[X]×·J_r(ω),
            ∂u/∂Y = (fx/Z, 0, −fx·X/Z²),  ∂v/∂Y = (0, fy/Z, −fy·Y/Z²)
        """
        inputs = self.inputs
        k = inputs.rig.intrinsics
        depth1 = inputs.depth1()
        flow, validity = rigid_flow(depth1, inputs.pose, k)
        mask = rigid_static_weight(self._visible(), self._moving()) * validity.as_float()
        value, flow_grad = self._warped_photometric(flow, mask)

        cloud = backproject(depth1, k)
        moved = transform(cloud, inputs.pose).points
        valid = validity.values
        x, y, z = moved[..., 0], moved[..., 1], np.where(valid, moved[..., 2], 1.0)
        g_u = np.where(valid, flow_grad[..., 0], 0.0)
        g_v = np.where(valid, flow_grad[..., 1], 0.0)
        grad_points = np.stack([g_u * k.fx / z,
                                g_v * k.fy / z,
                                -(g_u * k.fx * x + g_v * k.fy * y) / z ** 2], axis=2)

        grad_translation = np.einsum('hwi->i', grad_points)
        rotated_back = np.einsum('ji,hwj->hwi', inputs.pose.rotation, grad_points)
        points1 = np.where(valid[..., None], cloud.points, 0.0)
        lever = np.einsum('hwi->i', np.cross(rotated_back, points1))
        jacobian = so3_right_jacobian(pose_to_6dof(inputs.pose)[3:])
        grad_rotation = -jacobian.T @ lever
        return value, np.concatenate([grad_translation, grad_rotation])


def _as_enum(kind, value):
    if isinstance(value, kind):
        return value
    try:
        return kind(value)
    except ValueError:
        raise UnsupportedGradientError(f"unknown {kind.__name__} '{value}'", source=str(value))


def gradient(loss, inputs: LossInputs, wrt, weights: LossWeights = None) -> GradientBundle:
    """
    Analytic partial derivatives of one loss term.

    Args:
        loss: LossTerm or its string value
        inputs: the sample's LossInputs
        wrt: LossInput or its string value
        weights: loss hyper-parameters (defaults when omitted)

    Raises:
        UnsupportedGradientError: the pair carries no gradient
    """
    return GradientEngine(inputs, weights).compute(loss, wrt)
