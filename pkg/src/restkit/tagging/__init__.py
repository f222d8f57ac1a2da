"""restkit Tagging Package.

This package splits a generated response into the weight regions (format,
tool name, parameter, thought, other) and computes per-region entropy.

Modules:
    - RegionTagger: Byte-level tokenizer, region tagging and entropy statistics.
"""
