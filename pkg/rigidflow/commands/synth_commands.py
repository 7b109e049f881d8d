"""
Synthetic Scene Commands
========================
    synth         render a scene config and export the sample
    synth-config  write a seeded random scene config
    perturb       write a seeded perturbation of a pose (alignment test input)
"""
import logging

from ..services import synth
from ..services.formats import atomic_write_bytes, write_poses
from .common import add_compression, add_output, load_pose, success

logger = logging.getLogger(__name__)


def cmd_synth(args):
    config = synth.load_scene_config(args.scene_config)
    sample = synth.render(config)
    written = synth.export(sample, args.out_dir, compression=args.compression)
    moving = sample.moving1.count()
    success(f"Rendered {config.intrinsics.width}x{config.intrinsics.height} scene "
            f"({moving} moving pixels) into {args.out_dir} ({len(written)} files)")
    return 0


def cmd_synth_config(args):
    config = synth.generate_scene_config(args.seed, width=args.width, height=args.height,
                                         n_objects=args.objects, moving=not args.static,
                                         baseline=args.baseline)
    atomic_write_bytes(args.out, synth.dump_scene_config(config).encode('utf-8'))
    success(f"Scene config for seed {args.seed} written to {args.out}")
    return 0


def cmd_perturb(args):
    pose = load_pose(args.pose, args.frame)
    perturbed = synth.perturb_pose(pose, args.rot_deg, args.trans_m, seed=args.seed)
    write_poses(args.out, [perturbed])
    success(f"Perturbed pose ({args.rot_deg}°, {args.trans_m} m) written to {args.out}")
    return 0


def register(subparsers, cfg):
    parser = subparsers.add_parser('synth', help='render a scene config into a sample directory')
    parser.add_argument('scene_config', metavar='config', help='scene config (TOML)')
    parser.add_argument('out_dir', help='output directory')
    add_compression(parser, cfg)
    parser.set_defaults(func=cmd_synth)

    parser = subparsers.add_parser('synth-config', help='write a seeded random scene config')
    parser.add_argument('seed', type=int)
    add_output(parser, 'scene config path (TOML)')
    parser.add_argument('--width', type=int, default=cfg.DEFAULT_WIDTH)
    parser.add_argument('--height', type=int, default=cfg.DEFAULT_HEIGHT)
    parser.add_argument('--objects', type=int, default=1, help='number of object rectangles')
    parser.add_argument('--static', action='store_true', help='objects do not move')
    parser.add_argument('--baseline', type=float, default=synth.DEFAULT_BASELINE)
    parser.set_defaults(func=cmd_synth_config)

    parser = subparsers.add_parser('perturb', help='perturb a relative pose by a fixed angle and offset')
    parser.add_argument('--pose', required=True, help='pose file (T12 or trajectory)')
    parser.add_argument('--frame', type=int, default=0, help='trajectory frame of T12')
    parser.add_argument('--rot-deg', type=float, default=2.0)
    parser.add_argument('--trans-m', type=float, default=0.2)
    parser.add_argument('--seed', type=int, default=0)
    add_output(parser, 'single-line pose file')
    parser.set_defaults(func=cmd_perturb)
