"""Packaged environment descriptions (JSON)."""
