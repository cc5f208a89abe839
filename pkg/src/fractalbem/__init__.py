"""Piecewise-constant boundary element solver for acoustic scattering by
fractal and prefractal planar screens."""

__version__ = "0.1.0"

from .bem import Density, IncidentWave, LinearSystem, assemble_collocation, solve
from .fields import eval_scattered, eval_total, far_field
from .geometry import generate_prefractal
from .kernels import KernelSpec, eval_kernel
from .meshing import Mesh, mesh_grouped, mesh_per_component, uniform_lattice_mesh
from .norms import density_difference_norm, energy_norm, farfield_norm, near_field_norm

__all__ = [
    "Density", "IncidentWave", "KernelSpec", "LinearSystem", "Mesh",
    "assemble_collocation", "density_difference_norm", "energy_norm", "eval_kernel",
    "eval_scattered", "eval_total", "far_field", "farfield_norm", "generate_prefractal",
    "mesh_grouped", "mesh_per_component", "near_field_norm", "solve", "uniform_lattice_mesh",
]
