"""restkit Configs Package.

This package contains the run configuration and the packaged environments.

Modules:
    - configs: Config loading, defaults, verification and typed builders.
"""
