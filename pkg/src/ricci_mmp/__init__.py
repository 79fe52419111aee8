"""Kahler-Ricci flow through the minimal model program, at desk scale.

Exact toric intersection theory and MMP with scaling, periodic Monge-Ampere
solvers and flows in the one-dimensional local model, and axisymmetric Ricci
flow on the sphere.
"""

__version__ = "0.1.0"
