"""Nonequilibrium steady states of a bosonic or fermionic QWZ lattice.

The lattice is coupled to a hot reservoir on its left column and a cold
reservoir on its right column.  The package computes the exact quadratic
steady state by nonequilibrium Green's functions, bond currents and their
edge/bulk split, a weak-coupling oracle, symmetry residuals and a
semiclassical Berry-curvature picture of the edge current.
"""
__version__ = "0.1.0"

from .baths import BOSON, FERMION, BathSpec, build_self_energies, occupation
from .errors import (ConfigurationError, ConvergenceError, DivergenceError, IntegrationError,
                     NumericalError, QWZError, SingularityError, ValidationError)
from .lattice import ImpuritySet, LatticeSpec, build_hamiltonian, single_particle_spectrum
from .negf import (EffectiveHamiltonian, effective_hamiltonian, landauer_current,
                   steady_correlation)
from .observables import CurrentField, bond_currents, edge_bulk_diagnostics
from .quadrature import QuadratureSpec

__all__ = [
    "BOSON", "FERMION", "BathSpec", "build_self_energies", "occupation",
    "ConfigurationError", "ConvergenceError", "DivergenceError", "IntegrationError",
    "NumericalError", "QWZError", "SingularityError", "ValidationError",
    "ImpuritySet", "LatticeSpec", "build_hamiltonian", "single_particle_spectrum",
    "EffectiveHamiltonian", "effective_hamiltonian", "landauer_current", "steady_correlation",
    "CurrentField", "bond_currents", "edge_bulk_diagnostics", "QuadratureSpec",
]
