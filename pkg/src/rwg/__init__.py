"""Resonant tunnelling of a quantum waveguide with two narrows.

Finite-element scattering on the truncated waveguide, limit-problem
constants, closed-form resonance asymptotics and their comparison.
"""
from .asymptotics import AsymptoticPeak, asymptotic_peak, k_res_asymptotic, t_asymptotic, width_at_height
from .comparison import ComparisonReport, compare
from .constants import (FemOptions, TunnelingConstants, amplitude_constant, assemble_constants, compute_constants,
                        narrow_constants, resonator_constants)
from .geometry import Tag, WaveguideGeometry
from .mesh import Mesh, triangulate
from .modes import ModeBasis, mode_basis, threshold
from .peaks import NumericalPeak, NumericsOptions, find_peak, locate_peak, sweep_transmission
from .scattering import ScatteringMatrix, WaveguideModel, scattering_matrix, transmission

__version__ = "0.1.0"

__all__ = [
    "AsymptoticPeak", "ComparisonReport", "FemOptions", "Mesh", "ModeBasis", "NumericalPeak", "NumericsOptions",
    "ScatteringMatrix", "Tag", "TunnelingConstants", "WaveguideGeometry", "WaveguideModel", "amplitude_constant",
    "assemble_constants", "asymptotic_peak", "compare", "compute_constants", "find_peak", "k_res_asymptotic",
    "locate_peak", "mode_basis", "narrow_constants", "resonator_constants", "scattering_matrix",
    "sweep_transmission", "t_asymptotic", "threshold", "transmission", "triangulate", "width_at_height",
]
