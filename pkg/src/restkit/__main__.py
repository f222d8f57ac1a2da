# src/restkit/__main__.py
"""Entry point for the CLI."""

from .cli import cli

if __name__ == "__main__":
    cli()
