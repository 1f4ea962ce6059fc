"""Ground states of the planar coupled logarithmic Hartree system."""

from .descent import ConvergenceError, GaussianInit, SolverConfig
from .energy import EnergyBreakdown, SystemParams, j_energy
from .grid import GridSpec, make_grid
from .kernel import KernelTable, build_kernel

__version__ = "0.1.0"

__all__ = [
    "ConvergenceError", "EnergyBreakdown", "GaussianInit", "GridSpec", "KernelTable",
    "SolverConfig", "SystemParams", "build_kernel", "j_energy", "make_grid", "__version__",
]
