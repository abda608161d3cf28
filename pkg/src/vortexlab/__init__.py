"""Desk-scale laboratory for the stochastic 2D Navier-Stokes vorticity equation.

Subpackages cover the truncated spectral dynamics, forward/adjoint linearized
flows, Malliavin covariance assembly, forcing-geometry reachability analysis,
and the quadratic-variation / small-ball toolkit, plus a JSON-config CLI.
"""

__version__ = "0.1.0"
