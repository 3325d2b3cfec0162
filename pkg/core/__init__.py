"""
Core module for halfspace-kernels.

This module contains the numerics: grids and torus convolution, elliptic
systems, maximal operators and weights, function-space norms, Poisson kernel
constructions, the Dirichlet solver and the experiment suite runner.
"""

from core.errors import ComputationError, HalfSpaceError, InputError

__all__ = ['HalfSpaceError', 'InputError', 'ComputationError']
