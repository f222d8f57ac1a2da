"""restkit Policy Package.

This package contains the linear-softmax policies, the small sequence
environments they act in and exact enumeration oracles.

Modules:
    - SoftmaxPolicy: Softmax math, feature maps and the policy class.
    - ToyEnv: Environments, trajectory records and sampling.
    - ExactOracle: Exact expectations by full enumeration.
"""
