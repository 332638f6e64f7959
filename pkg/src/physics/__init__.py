"""
Physics engines for quench dynamics of the DATXY chain.

This package contains the momentum-space Bogoliubov engine, the Loschmidt
echo and critical-time search, the real-space Gaussian engine, entanglement
measures and the exact-diagonalization oracle.
"""

from src.physics.model import CouplingSet, MomentumGrid, PhaseLabel, QuenchSpec
from src.physics.phase import classify_phase
from src.physics.loschmidt import find_critical_times, rate_function

__all__ = [
    "CouplingSet",
    "MomentumGrid",
    "PhaseLabel",
    "QuenchSpec",
    "classify_phase",
    "find_critical_times",
    "rate_function",
]
