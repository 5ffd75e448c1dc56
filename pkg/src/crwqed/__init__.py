"""Emitters coupled at two sites to a resonator chain.

Exact waveguide-induced rate tables, reduced master equations with closed-form
solutions, and a full lattice integrator for cross-checking both.
"""

from .lattice import (
    IntegrationError,
    LatticeState,
    SparseHamiltonian,
    atom_population,
    build_hamiltonian,
    center_geometry,
    excited_state,
    propagate,
    total_norm,
)
from .lindblad import (
    EvolutionError,
    PTPhase,
    TwoAtomRates,
    basis_ket,
    bell_fidelity,
    bell_target,
    build_liouvillian,
    evolve_density,
    excited_population,
    fidelity_linear_estimate,
    markov_pe,
    p1_closed,
    p2_closed,
    pt_eigenfrequencies,
    pure_density,
    single_atom_evolve,
    transmission_closed,
)
from .model import (
    Atom,
    AtomGeometry,
    ExactCoefficient,
    RateConstraint,
    RateTable,
    SearchHit,
    SingleAtomClass,
    Topology,
    WaveguideConfig,
    classify_single,
    classify_topology,
    coefficient_matrix,
    dispersion,
    phase_unit,
    search_geometries,
    single_atom_coefficient,
)

__all__ = [
    "Atom",
    "AtomGeometry",
    "EvolutionError",
    "ExactCoefficient",
    "IntegrationError",
    "LatticeState",
    "PTPhase",
    "RateConstraint",
    "RateTable",
    "SearchHit",
    "SingleAtomClass",
    "SparseHamiltonian",
    "Topology",
    "TwoAtomRates",
    "WaveguideConfig",
    "atom_population",
    "basis_ket",
    "bell_fidelity",
    "bell_target",
    "build_hamiltonian",
    "build_liouvillian",
    "center_geometry",
    "classify_single",
    "classify_topology",
    "coefficient_matrix",
    "dispersion",
    "evolve_density",
    "excited_population",
    "excited_state",
    "fidelity_linear_estimate",
    "markov_pe",
    "p1_closed",
    "p2_closed",
    "phase_unit",
    "propagate",
    "pt_eigenfrequencies",
    "pure_density",
    "search_geometries",
    "single_atom_coefficient",
    "single_atom_evolve",
    "total_norm",
    "transmission_closed",
]

__version__ = "0.1.0"
