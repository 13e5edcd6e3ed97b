"""Numerical pseudodifferential toolkit for Gevrey well-posedness of linear p-evolution equations."""

from .config import ConfigError, GevreyConfig, preset_config
from .grid import Grid, StateVector, bracket_h, make_grid
from .kernels import BACKEND as KERNEL_BACKEND
from .norms import GevreyNormSpec, gs_norm
from .problems import Problem, make_preset

__version__ = "0.1.0"

__all__ = [
    "ConfigError", "GevreyConfig", "preset_config", "Grid", "StateVector", "bracket_h", "make_grid",
    "KERNEL_BACKEND", "GevreyNormSpec", "gs_norm", "Problem", "make_preset", "__version__",
]
