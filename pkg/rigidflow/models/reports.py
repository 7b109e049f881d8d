"""
Parameter bundles and result reports.
Every report converts to a plain dict (``to_dict``) for the JSON writers.
"""
import enum
from dataclasses import dataclass, field
from typing import Dict, List, Optional

import numpy as np
import pandas as pd

from ..exceptions import InvalidParameterError
from .camera import PoseSE3
from .rasters import Mask

FORMAT_VERSION = 1


class LossTerm(enum.Enum):
    """Loss identifiers accepted by the gradient service."""
    PHOTOMETRIC = 'photometric'
    SMOOTHNESS = 'smoothness'
    STEREO = 'stereo'
    RIGID = 'rigid'
    RIGID_REFINED = 'rigid_refined'
    CONSISTENCY = 'consistency'


class LossInput(enum.Enum):
    """Differentiable inputs of the loss suite."""
    FLOW_OPT = 'flow_opt'
    FLOW_RIG = 'flow_rig'
    FLOW_RIG_REFINED = 'flow_rig_refined'
    DISP_LEFT = 'disp_left'
    DISP_RIGHT = 'disp_right'
    POSE = 'pose'


class EvalTask(enum.Enum):
    FLOW = 'flow'
    DEPTH = 'depth'
    ODOMETRY = 'odometry'
    SEGMENTATION = 'segmentation'


@dataclass(frozen=True, eq=False)
class AlignmentResult:
    """Outcome of one rigid-alignment refinement."""

    delta: PoseSE3
    refined: PoseSE3
    region: Mask
    rms_before: float
    rms_after: float
    eligible_count: int = 0

    @property
    def region_count(self):
        return self.region.count()

    def to_dict(self):
        return {
            'delta': self.delta.to_dict(),
            'refined': self.refined.to_dict(),
            'rms_before': self.rms_before,
            'rms_after': self.rms_after,
            'region_pixels': self.region_count,
            'eligible_pixels': self.eligible_count,
            'region_coverage': self.region_count / self.eligible_count if self.eligible_count else 0.0,
        }


@dataclass(frozen=True)
class SegmentationParams:
    """Flow-consistency threshold (pixels)."""

    delta: float = 3.0

    def __post_init__(self):
        if not self.delta > 0:
            raise InvalidParameterError(f"delta must be positive (got {self.delta})")


@dataclass(frozen=True)
class LossWeights:
    """Weights of the total loss plus the photometric blend and edge factor."""

    lambda_sm: float = 10.0
    lambda_st: float = 1.0
    lambda_rig: float = 10.0
    lambda_con: float = 0.01
    alpha: float = 0.85
    beta: float = 10.0
    delta: float = 3.0
    stereo_weights: tuple = (1.0, 0.1, 1.0)
    ssim_window: int = 3

    def __post_init__(self):
        for name in ('lambda_sm', 'lambda_st', 'lambda_rig', 'lambda_con', 'alpha', 'beta', 'delta'):
            if getattr(self, name) < 0:
                raise InvalidParameterError(f"{name} must be non-negative")
        if self.alpha > 1:
            raise InvalidParameterError(f"alpha must be at most 1 (got {self.alpha})")
        if len(self.stereo_weights) != 3 or min(self.stereo_weights) < 0:
            raise InvalidParameterError("stereo_weights needs three non-negative entries")
        if self.ssim_window < 1 or self.ssim_window % 2 == 0:
            raise InvalidParameterError("ssim_window must be a positive odd integer")

    @classmethod
    def from_config(cls, cfg, **overrides):
        """Defaults from a config class; keyword overrides win when not None."""
        values = {
            'lambda_sm': cfg.LAMBDA_SM,
            'lambda_st': cfg.LAMBDA_ST,
            'lambda_rig': cfg.LAMBDA_RIG,
            'lambda_con': cfg.LAMBDA_CON,
            'alpha': cfg.SSIM_ALPHA,
            'beta': cfg.EDGE_BETA,
            'delta': cfg.MOTION_DELTA,
            'stereo_weights': tuple(cfg.STEREO_WEIGHTS),
            'ssim_window': cfg.SSIM_WINDOW,
        }
        values.update({k: v for k, v in overrides.items() if v is not None})
        return cls(**values)


@dataclass(frozen=True)
class LossReport:
    """Scalar loss terms, their supports, and the weighted total."""

    opt_ph: float
    opt_sm: float
    stereo: float
    rig1: float
    rig2: float
    con: float
    total: float
    counts: Dict[str, int] = field(default_factory=dict)
    empty_support: List[str] = field(default_factory=list)
    stage: int = 3

    def to_dict(self):
        return {
            'format_version': FORMAT_VERSION,
            'stage': self.stage,
            'opt_ph': self.opt_ph,
            'opt_sm': self.opt_sm,
            'stereo': self.stereo,
            'rig1': self.rig1,
            'rig2': self.rig2,
            'con': self.con,
            'total': self.total,
            'pixel_counts': dict(self.counts),
            'empty_support': list(self.empty_support),
        }


@dataclass(frozen=True, eq=False)
class GradientBundle:
    """Partial derivatives of one scalar loss, keyed by input identifier."""

    loss: LossTerm
    value: float
    partials: Dict[str, np.ndarray]

    def __getitem__(self, key):
        if isinstance(key, LossInput):
            key = key.value
        return self.partials[key]

    def norm(self):
        return float(np.sqrt(sum(np.sum(p * p) for p in self.partials.values())))


def _optional(value):
    return None if value is None else float(value)


@dataclass(frozen=True)
class FlowEval:
    """End-point errors (pixels) per region and the Fl-all outlier percentage."""

    epe_noc: Optional[float]
    epe_occ: Optional[float]
    epe_all: Optional[float]
    epe_move: Optional[float]
    epe_static: Optional[float]
    fl_all: Optional[float]
    undefined: List[str] = field(default_factory=list)

    def to_dict(self):
        return {
            'format_version': FORMAT_VERSION,
            'task': EvalTask.FLOW.value,
            'epe_noc': _optional(self.epe_noc),
            'epe_occ': _optional(self.epe_occ),
            'epe_all': _optional(self.epe_all),
            'epe_move': _optional(self.epe_move),
            'epe_static': _optional(self.epe_static),
            'fl_all': _optional(self.fl_all),
            'undefined': list(self.undefined),
        }


@dataclass(frozen=True)
class DepthEval:
    """Standard depth metrics plus the disparity outlier rate D1-all (%)."""

    abs_rel: float
    sq_rel: float
    rmse: float
    rmse_log: float
    d1_all: Optional[float]
    delta1: float
    delta2: float
    delta3: float
    undefined: List[str] = field(default_factory=list)

    def to_dict(self):
        return {
            'format_version': FORMAT_VERSION,
            'task': EvalTask.DEPTH.value,
            'abs_rel': self.abs_rel,
            'sq_rel': self.sq_rel,
            'rmse': self.rmse,
            'rmse_log': self.rmse_log,
            'd1_all': _optional(self.d1_all),
            'delta1': self.delta1,
            'delta2': self.delta2,
            'delta3': self.delta3,
            'undefined': list(self.undefined),
        }


@dataclass(frozen=True, eq=False)
class OdomEval:
    """Trajectory metrics: snippet ATE and KITTI relative errors."""

    ate_mean: Optional[float]
    ate_std: Optional[float]
    t_err_percent: Optional[float]
    r_err_deg_per_100m: Optional[float]
    snippets: pd.DataFrame = None
    segments: pd.DataFrame = None
    skipped_snippets: int = 0

    def per_length(self):
        """Mean errors grouped by sub-sequence length (devkit-style table)."""
        if self.segments is None or self.segments.empty:
            return {}
        grouped = self.segments.groupby('length')[['t_err', 'r_err']].mean()
        return {
            str(int(length)): {
                't_err_percent': float(row['t_err'] * 100.0),
                'r_err_deg_per_100m': float(np.degrees(row['r_err']) * 100.0),
            }
            for length, row in grouped.iterrows()
        }

    def to_dict(self):
        return {
            'format_version': FORMAT_VERSION,
            'task': EvalTask.ODOMETRY.value,
            'ate_mean': _optional(self.ate_mean),
            'ate_std': _optional(self.ate_std),
            't_err_percent': _optional(self.t_err_percent),
            'r_err_deg_per_100m': _optional(self.r_err_deg_per_100m),
            'snippets': 0 if self.snippets is None else int(len(self.snippets)),
            'skipped_snippets': self.skipped_snippets,
            'segments': 0 if self.segments is None else int(len(self.segments)),
            'per_length': self.per_length(),
        }


@dataclass(frozen=True)
class SegEval:
    """Two-class (static / moving) segmentation scores."""

    pixel_acc: Optional[float]
    mean_acc: Optional[float]
    mean_iou: Optional[float]
    fw_iou: Optional[float]
    undefined: List[str] = field(default_factory=list)

    def to_dict(self):
        return {
            'format_version': FORMAT_VERSION,
            'task': EvalTask.SEGMENTATION.value,
            'pixel_acc': _optional(self.pixel_acc),
            'mean_acc': _optional(self.mean_acc),
            'mean_iou': _optional(self.mean_iou),
            'fw_iou': _optional(self.fw_iou),
            'undefined': list(self.undefined),
        }
