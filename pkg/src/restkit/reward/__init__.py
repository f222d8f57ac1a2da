"""restkit Reward Package.

This package scores raw responses against gold tool calls with the rule-based
reward: format score, name/parameter/value matching, normalization and
dynamic scaling.

Modules:
    - RewardScorer: Reward configuration, breakdown and scoring functions.
"""
