"""Travelling waves of a delayed diffusive SIR model by crossed monotone iteration."""
from .bracket import Bracket, build_bracket
from .charroots import compute_roots
from .errors import SirWaveError
from .greens import GreenKernel, convolve, green_numeric, solve_linear_fde
from .grid import Grid, ProfileFunction, ProfileTriple
from .iteration import apply_F, apply_H, build_kernels, cross_iterate, decay_norm, wave_residual
from .kernels import BACKEND
from .model import (SirParameters, WaveFrameParameters, critical_wave_speed,
                    endemic_equilibrium, reproduction_number, wave_frame)

__version__ = "0.1.0"

__all__ = [
    "BACKEND", "Bracket", "GreenKernel", "Grid", "ProfileFunction", "ProfileTriple",
    "SirParameters", "SirWaveError", "WaveFrameParameters", "apply_F", "apply_H",
    "build_bracket", "build_kernels", "compute_roots", "convolve", "critical_wave_speed",
    "cross_iterate", "decay_norm", "endemic_equilibrium", "green_numeric",
    "reproduction_number", "solve_linear_fde", "wave_frame", "wave_residual",
]
