"""
Command-line application for the rigidflow toolkit.
Builds the argument parser from the command groups and maps library errors
to one-line diagnostics and exit codes.
"""
import argparse
import logging
import sys

from dotenv import load_dotenv

# Load environment variables from .env file
load_dotenv()

from rigidflow import __version__
from rigidflow.config import get_config
from rigidflow.exceptions import RigidFlowError

logger = logging.getLogger(__name__)

OS_ERROR_EXIT_CODE = 9


def create_app(config_name=None):
    """
    Application factory for the command-line parser.

    Args:
        config_name: Configuration to use ('development', 'production', 'testing')

    Returns:
        argparse.ArgumentParser whose sub-commands carry a ``func`` default
    """
    cfg = get_config(config_name)

    parser = argparse.ArgumentParser(
        prog='rigidflow',
        description='Rigid flow, pose refinement, motion segmentation, losses and metrics '
                    'for unsupervised depth and flow learning from stereo video.',
    )
    parser.add_argument('--version', action='version', version=f'%(prog)s {__version__}')
    parser.add_argument('--log-level', default=cfg.LOG_LEVEL,
                        help='logging level (default %(default)s)')
    subparsers = parser.add_subparsers(dest='command', required=True, metavar='command')

    # Register command groups
    from rigidflow.commands import (eval_commands, loss_commands, rigid_commands,
                                    synth_commands, viz_commands)

    synth_commands.register(subparsers, cfg)
    rigid_commands.register(subparsers, cfg)
    loss_commands.register(subparsers, cfg)
    eval_commands.register(subparsers, cfg)
    viz_commands.register(subparsers, cfg)

    parser.set_defaults(config=cfg)
    return parser


def configure_logging(level):
    logging.basicConfig(
        level=getattr(logging, str(level).upper(), logging.INFO),
        format='%(asctime)s %(levelname)s %(name)s: %(message)s',
        stream=sys.stderr,
    )


def main(argv=None, config_name=None):
    """
    Run one command.

    Returns:
        process exit code: 0 on success, the error's ``exit_code`` otherwise
    """
    parser = create_app(config_name)
    args = parser.parse_args(argv)
    configure_logging(args.log_level)
    logger.debug(f"running '{args.command}' with the {args.config.__name__}")
    try:
        return args.func(args)
    except RigidFlowError as exc:
        print(f"❌ {args.command}: {exc.diagnostic()}", file=sys.stderr)
        return exc.exit_code
    except OSError as exc:
        target = exc.filename or 'I/O'
        print(f"❌ {args.command}: {target}: {exc.strerror or exc}", file=sys.stderr)
        return OS_ERROR_EXIT_CODE
