"""Spectral gaps at first-order quantum phase transitions.

Exact diagonalization of the staggered-field Ising chain and the frustrated
Ising ladder, the free-fermion solution of the chain, the quantum dimer
ladder, gap-scaling analysis, and a simulated-annealing comparator.
"""
from ._core import BACKEND

__version__ = "0.1.0"


class CapacityError(ValueError):
    """Requested basis or matrix exceeds a size guard."""


class NumericalError(RuntimeError):
    """An iterative method failed to converge or a quantity is ill-defined."""


__all__ = ["BACKEND", "CapacityError", "NumericalError", "__version__"]
