"""
Visualization Commands
======================
    flow-viz  color-wheel rendering of a flow PNG
"""
import logging

from ..services.flow_viz import flow_to_color
from ..services.formats import write_image
from .common import add_compression, add_output, load_flow, success

logger = logging.getLogger(__name__)


def cmd_flow_viz(args):
    flow, validity = load_flow(args.flow)
    if args.ignore_validity:
        validity = None
    image = flow_to_color(flow, validity, max_magnitude=args.max_magnitude)
    write_image(args.out, image, compression=args.compression)
    success(f"Flow visualization written to {args.out}")
    return 0


def register(subparsers, cfg):
    parser = subparsers.add_parser('flow-viz', help='render a flow PNG with the color wheel')
    parser.add_argument('--flow', required=True, help='16-bit flow PNG')
    parser.add_argument('--max-magnitude', type=float,
                        help='normalizing magnitude in pixels (default: largest valid magnitude)')
    parser.add_argument('--ignore-validity', action='store_true', help='draw invalid pixels too')
    add_output(parser, 'RGB PNG')
    add_compression(parser, cfg)
    parser.set_defaults(func=cmd_flow_viz)
