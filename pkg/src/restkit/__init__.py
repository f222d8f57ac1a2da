# src/restkit/__init__.py
"""restkit."""

from .restkit import RestKit

__all__ = ["RestKit"]
