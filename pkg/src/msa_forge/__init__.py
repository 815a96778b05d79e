"""Finite-volume multi-scale analysis for the Anderson tight-binding model.

Lattice boxes and boundaries (:mod:`.geometry`), keyed random potentials
(:mod:`.disorder`), Hamiltonians (:mod:`.operator`), Green functions and box
classification (:mod:`.green`), radial-descent bounds (:mod:`.descent`) and
the Monte-Carlo scale-induction harness (:mod:`.harness`).
"""
from .descent import check_descent, descent_bound, ns_implication, q_factors, verify_subharmonic
from .disorder import PiecewiseLinearCDF, Uniform, sample
from .errors import (
    CapacityError,
    ConfigError,
    ContainmentError,
    CoverageError,
    DomainError,
    InteractionNonzeroError,
    MSAError,
    ResonantEnergyError,
    ResonantInnerError,
    ScheduleError,
)
from .geometry import Box, LatticePoint, boundary_sets, diagonal_distance
from .green import classify, effective_mass, gamma, green_column, gri_check
from .harness import (
    MassSequence,
    Model,
    estimate_ss,
    mp_step_events,
    schedule,
    tensor_spectrum_check,
    verify_induction,
    wegner_estimate,
)
from .operator import InteractionSpec, assemble, dirichlet_split, spectrum

__version__ = "0.1.0"
