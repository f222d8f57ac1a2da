"""restkit Estimators Package.

This package contains the policy-gradient estimators and the tools that measure
and minimize their variance.

Modules:
    - GradientEstimators: Advantages, trajectory and mini-batch gradients.
    - OptimalWeights: Variance profiles, optimal weights, bounds and entropy surrogates.
    - VarianceSimulation: Seeded Monte-Carlo variance measurement with bootstrap intervals.
"""
