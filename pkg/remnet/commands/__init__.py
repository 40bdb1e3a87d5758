"""CLI commands; each module exposes ``register(subparsers)`` and ``run(args)``"""

COMMANDS = ["synth", "split", "augment", "train", "eval", "score_patch", "gradcheck", "experiment"]
