"""Distributionally robust convergence analysis for first-order methods.

Builds worst-case and Wasserstein-ambiguity performance bounds for
gradient methods on convex problems, calibrated on sampled problem
instances, and fits convergence-rate envelopes to the results.
"""

__version__ = "0.1.0"
