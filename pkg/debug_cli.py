# debug_cli.py
"""Used for debugging the CLI in VS code, you can ignore this file."""

from src.restkit.cli import cli

if __name__ == "__main__":
    cli()
