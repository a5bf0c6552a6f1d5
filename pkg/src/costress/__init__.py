"""Verification laboratory for the linear isotropic indeterminate couple
stress model: tensor calculus, curvature-energy regimes, traction boundary
condition decompositions, conformal invariance checks and a small
variational solver."""

__version__ = "0.1.0"
