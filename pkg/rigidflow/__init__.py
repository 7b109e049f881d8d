"""
rigidflow - geometry toolkit for unsupervised depth and optical-flow learning
from stereo video: rigid flow, SVD pose refinement, motion segmentation,
the self-supervised loss suite, synthetic scenes and KITTI-style metrics.
"""
__version__ = '1.0.0'
