"""Normalized solutions of a biharmonic NLS system with one shared mass constraint."""

from .constants import (
    ThresholdSet,
    borderline_check,
    critical_exponents,
    estimate_R,
    gamma_r,
    gn_constant_estimate,
    thresholds,
)
from .ground_state import (
    SolveConfig,
    SolveReport,
    SolveStatus,
    best_of_restarts,
    coercivity_guard,
    dichotomy_scan,
    init_strategies,
    minimize_ground_state,
    project_to_sphere,
)
from .model import StatePair, SystemParams, energy_I, energy_J, mj_value, pohozaev_P, quotient_Q
from .mountain_pass import SaddleConfig, SaddleReport, bracket_roots_h, build_endpoints, saddle_search
from .spectral import GridSpec, RealField, dilate

__version__ = "0.1.0"
