"""Attractors, resonance thresholds and basin statistics of the damped
pendulum with a vertically oscillating support."""

from .errors import (
    AboveThresholdError,
    AbsentPairError,
    BasinforgeError,
    DomainError,
    IntegrationError,
    LostTrackError,
    NoSolutionError,
    SeparatrixError,
)
from .model import CubicParams, DampingSchedule, PendulumParams, State, cubic_field, pendulum_field
from .integrate import IntegratorSpec, integrate_samples, integrate_to, poincare_series
from .basins import (
    AttractorLibrary,
    BasinReport,
    ClassificationPolicy,
    SamplingSpec,
    bifurcation_scan,
    classify_trajectory,
    detect_period,
    estimate_basins,
    sweep,
    symmetry_audit,
)
from .thresholds import ResonanceSpec, ThresholdRow, threshold_C1, threshold_table
from .stability import floquet, global_attraction_bound, energy_decrease_certificate
from .actionangle import ActionAngle, from_cartesian, to_cartesian

__version__ = "0.1.0"

__all__ = [
    "AboveThresholdError", "AbsentPairError", "ActionAngle", "AttractorLibrary", "BasinReport",
    "BasinforgeError", "ClassificationPolicy", "CubicParams", "DampingSchedule", "DomainError",
    "IntegrationError", "IntegratorSpec", "LostTrackError", "NoSolutionError", "PendulumParams",
    "ResonanceSpec", "SamplingSpec", "SeparatrixError", "State", "ThresholdRow", "bifurcation_scan",
    "classify_trajectory", "cubic_field", "detect_period", "energy_decrease_certificate",
    "estimate_basins", "floquet", "from_cartesian", "global_attraction_bound", "integrate_samples",
    "integrate_to", "pendulum_field", "poincare_series", "sweep", "symmetry_audit", "threshold_C1",
    "threshold_table", "to_cartesian",
]
