"""Least-energy and multiple solutions of competitive elliptic systems.

Solutions are found by minimising the energy over the Nehari set, written
as a functional on a product of unit spheres.  Radial and angular
reductions turn the PDE into weighted one-dimensional problems.
"""
from .descent import DescentConfig, SolveReport, genus_seeds, minimize_psi, multistart
from .discretization import DomainSpec, Space, build_space
from .energy import System, SystemSpec, project_nehari, psi, psi_gradient
from .inner_problem import CouplingData, maximize

__version__ = "0.1.0"

__all__ = [
    "CouplingData",
    "DescentConfig",
    "DomainSpec",
    "SolveReport",
    "Space",
    "System",
    "SystemSpec",
    "build_space",
    "genus_seeds",
    "maximize",
    "minimize_psi",
    "multistart",
    "project_nehari",
    "psi",
    "psi_gradient",
]
