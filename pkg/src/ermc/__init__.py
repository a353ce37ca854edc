"""Emission-based reciprocal Monte Carlo radiative transfer on Cartesian grids."""
from .geometry import BoundarySpec, CartesianGrid, Wall, build_hierarchy
from .solver import SolutionField, SolveConfig, solve
from .spectral import SpectralModel, build_cdfs, build_k_distribution, grey_model, planck_mean

__version__ = "0.1.0"

__all__ = [
    "BoundarySpec", "CartesianGrid", "Wall", "build_hierarchy", "SolutionField", "SolveConfig",
    "solve", "SpectralModel", "build_cdfs", "build_k_distribution", "grey_model", "planck_mean",
]
