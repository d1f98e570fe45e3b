"""CLI module - command-line interface."""

from cbvf.cli.commands import cli

__all__ = ["cli"]
