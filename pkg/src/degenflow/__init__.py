"""Finite-volume simulation and diagnostics for coupled degenerate and
singular diffusion systems driven by a shared diffusion controller U."""
from .grid import BC, Grid, StateVector, Trajectory
from .kernels import BACKEND_NAME
from .model import (
    DomainError,
    Exponents,
    IdentityFlux,
    NoDrift,
    PowerDrift,
    RegimeError,
    ScaledRotationFlux,
    StructureConstants,
    classify_regime,
    derive,
    make_coupler,
    validate_structure,
)
from .solver import SolverConfig, simulate

__version__ = "0.1.0"

__all__ = [
    "BACKEND_NAME", "BC", "DomainError", "Exponents", "Grid", "IdentityFlux", "NoDrift", "PowerDrift",
    "RegimeError", "ScaledRotationFlux", "SolverConfig", "StateVector", "StructureConstants", "Trajectory",
    "classify_regime", "derive", "make_coupler", "simulate", "validate_structure",
]
