"""restkit Data Package.

This package contains constants and error types shared across restkit.

Modules:
    - constants: Region tags, the response template and numeric defaults.
    - exceptions: Domain error types.
"""
