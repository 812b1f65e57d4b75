"""Simulation and control stack for contact-based ultrasonic inspection with a quadrotor."""
from ._jit import BACKEND
from .scenario import Scenario, default_scenario, load_scenario
from .scheduler import run

__version__ = "0.1.0"
__all__ = ["BACKEND", "Scenario", "default_scenario", "load_scenario", "run", "__version__"]
