"""Simulation and analysis toolkit for a radar-assisted reconfigurable intelligent surface link."""

from .errors import (
    ConfigurationError,
    DataIOError,
    EstimationError,
    GeometryError,
    InvalidArgumentError,
    NumericalError,
    RisSimError,
    SingularFIMError,
)
from .scenario import Scenario, load_scenario

__version__ = "0.1.0"
