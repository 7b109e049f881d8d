"""
Domain types for the rigidflow toolkit.
All types are imported here for easy access.
"""
from .camera import Intrinsics, StereoRig, PoseSE3, nearest_rotation
from .rasters import DepthMap, DisparityMap, PointCloud, FlowField, Image, Mask
from .reports import (
    FORMAT_VERSION,
    LossTerm, LossInput, EvalTask,
    AlignmentResult, SegmentationParams, LossWeights, LossReport, GradientBundle,
    FlowEval, DepthEval, OdomEval, SegEval,
)
from .scene import PlaneSpec, ObjectSpec, SceneConfig, SceneSample

__all__ = [
    'Intrinsics', 'StereoRig', 'PoseSE3', 'nearest_rotation',
    'DepthMap', 'DisparityMap', 'PointCloud', 'FlowField', 'Image', 'Mask',
    'FORMAT_VERSION',
    'LossTerm', 'LossInput', 'EvalTask',
    'AlignmentResult', 'SegmentationParams', 'LossWeights', 'LossReport', 'GradientBundle',
    'FlowEval', 'DepthEval', 'OdomEval', 'SegEval',
    'PlaneSpec', 'ObjectSpec', 'SceneConfig', 'SceneSample',
]
