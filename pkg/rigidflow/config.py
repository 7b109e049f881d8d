"""
Configuration for the rigidflow toolkit.
Values come from the environment (a .env file is loaded by the entry point)
with the defaults used throughout the training recipe.
"""
import os


def _env_float(name, default):
    return float(os.environ.get(name, default))


def _env_int(name, default):
    return int(os.environ.get(name, default))


def _env_floats(name, default):
    raw = os.environ.get(name)
    if not raw:
        return tuple(default)
    return tuple(float(v) for v in raw.replace(',', ' ').split())


class Config:
    """Base configuration."""

    LOG_LEVEL = os.environ.get('LOG_LEVEL', 'INFO')

    # Rigid alignment / segmentation
    OCCLUSION_THRESHOLD = _env_float('OCCLUSION_THRESHOLD', 0.75)
    MOTION_DELTA = _env_float('MOTION_DELTA', 3.0)
    REGION_FRACTION = _env_float('REGION_FRACTION', 0.25)
    ALIGN_ITERATIONS = _env_int('ALIGN_ITERATIONS', 1)

    # Loss hyper-parameters [lambda_sm, lambda_st, lambda_rig, lambda_con, alpha, beta]
    LAMBDA_SM = _env_float('LAMBDA_SM', 10.0)
    LAMBDA_ST = _env_float('LAMBDA_ST', 1.0)
    LAMBDA_RIG = _env_float('LAMBDA_RIG', 10.0)
    LAMBDA_CON = _env_float('LAMBDA_CON', 0.01)
    SSIM_ALPHA = _env_float('SSIM_ALPHA', 0.85)
    EDGE_BETA = _env_float('EDGE_BETA', 10.0)
    SSIM_WINDOW = _env_int('SSIM_WINDOW', 3)
    # reconstruction / disparity smoothness / left-right consistency
    STEREO_WEIGHTS = _env_floats('STEREO_WEIGHTS', (1.0, 0.1, 1.0))

    # Evaluation
    DEPTH_CAP = _env_float('DEPTH_CAP', 80.0)
    ODOM_LENGTHS = tuple(int(v) for v in _env_floats('ODOM_LENGTHS', range(100, 801, 100)))
    ODOM_STEP = _env_int('ODOM_STEP', 1)

    # Synthetic scenes and file output
    DEFAULT_WIDTH = _env_int('DEFAULT_WIDTH', 832)
    DEFAULT_HEIGHT = _env_int('DEFAULT_HEIGHT', 256)
    PNG_COMPRESSION = _env_int('PNG_COMPRESSION', 3)


class DevelopmentConfig(Config):
    LOG_LEVEL = os.environ.get('LOG_LEVEL', 'DEBUG')


class TestingConfig(Config):
    LOG_LEVEL = os.environ.get('LOG_LEVEL', 'WARNING')
    DEFAULT_WIDTH = 64
    DEFAULT_HEIGHT = 32


class ProductionConfig(Config):
    LOG_LEVEL = os.environ.get('LOG_LEVEL', 'INFO')


config = {
    'development': DevelopmentConfig,
    'testing': TestingConfig,
    'production': ProductionConfig,
    'default': Config,
}


def get_config(config_name=None):
    """
    Resolve the active configuration class.

    Args:
        config_name: 'development', 'testing' or 'production'; falls back to
            the RIGIDFLOW_ENV environment variable, then 'development'.
    """
    if config_name is None:
        config_name = os.environ.get('RIGIDFLOW_ENV', 'development')
    return config.get(config_name, Config)
