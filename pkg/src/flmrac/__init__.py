"""Frequency-limited model-reference adaptive control at desk scale.

Simulation of the modified-reference architecture (mismatch term plus
low-pass filtered error dynamics), the classical architecture it reduces to,
and the analysis layer that verifies the transient, boundary-layer and
frequency-domain guarantees numerically.
"""

__version__ = "0.1.0"

from .analysis import BoundReport, MarginReport
from .controllers import ControllerConfig, ProjectionSpec
from .matrixcore import LyapunovPair
from .plantmodel import AugmentedSystem, BasisSpec, PlantModel, UncertaintyTruth
from .simulator import CommandSpec, NoiseSpec, ScenarioConfig, Trajectory, run

__all__ = [
    "BoundReport",
    "MarginReport",
    "ControllerConfig",
    "ProjectionSpec",
    "LyapunovPair",
    "AugmentedSystem",
    "BasisSpec",
    "PlantModel",
    "UncertaintyTruth",
    "CommandSpec",
    "NoiseSpec",
    "ScenarioConfig",
    "Trajectory",
    "run",
    "__version__",
]
