"""
CLI sub-command groups.
Each module exposes ``register(subparsers, cfg)``; ``rigidflow.app`` wires
them onto the parser.
"""
