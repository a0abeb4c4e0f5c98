"""Numerical laboratory for a BGK kinetic equation driven by a fast Ornstein-Uhlenbeck
process, its averaged diffusion limit, and the perturbed-test-function identities
linking the two."""

__version__ = "0.1.0"
