"""Depth-layered, fault-tolerant clustering for underwater sensor networks."""

from .config import ScenarioConfig, desk_profile, parse_config, render_config
from .simulation import Simulation, run

__all__ = ["ScenarioConfig", "Simulation", "desk_profile", "parse_config", "render_config", "run"]
__version__ = "0.1.0"
