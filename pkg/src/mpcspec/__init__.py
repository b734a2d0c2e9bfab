"""Multiphoton coincidence spectroscopy of a driven, damped Jaynes-Cummings system."""

__version__ = "0.1.0"

from mpcspec.params import SystemParams, fig2_params
from mpcspec.jc import DressedBasis, OperatorMatrix, build_basis, dressed_energy, op_matrix, hamiltonian_frame
from mpcspec.steady import BlochSolution, SolverError, PositivityError, solve_steady, npcr, density_element
from mpcspec.pathways import two_state_rho00, build_heff_terms, integrate_amplitudes, estimate_npcr
from mpcspec.ensemble import (
    CouplingDistribution, Spectrum, SpectrumSurface, pg_delta, pg_tem00, pg_table,
    average_spectrum, background_subtracted, surface, find_extrema,
)
from mpcspec.oracle import DensityTrajectory, integrate_master, dc_component
from mpcspec.config import RunConfig, parse_config


__all__ = [
    "SystemParams",
    "fig2_params",
    "DressedBasis",
    "OperatorMatrix",
    "build_basis",
    "dressed_energy",
    "op_matrix",
    "hamiltonian_frame",
    "BlochSolution",
    "SolverError",
    "PositivityError",
    "solve_steady",
    "npcr",
    "density_element",
    "two_state_rho00",
    "build_heff_terms",
    "integrate_amplitudes",
    "estimate_npcr",
    "CouplingDistribution",
    "Spectrum",
    "SpectrumSurface",
    "pg_delta",
    "pg_tem00",
    "pg_table",
    "average_spectrum",
    "background_subtracted",
    "surface",
    "find_extrema",
    "DensityTrajectory",
    "integrate_master",
    "dc_component",
    "RunConfig",
    "parse_config",
    "__version__",
]
