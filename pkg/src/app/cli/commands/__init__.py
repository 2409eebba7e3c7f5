"""Subcommands; each module exposes ``register(subparsers, parents)``."""
