"""restkit Objectives Package.

This package contains the region weight schedule, the clipped training losses
and a small training loop that puts them together.

Modules:
    - Curriculum: Entropy-initialized region weights, schedule and normalization.
    - ClippedObjectives: Token-weighted and unweighted clipped losses with exact gradients.
    - ToyTrainer: Training loop, learning traces and paired comparisons.
"""
