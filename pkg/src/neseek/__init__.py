"""Nash-equilibrium seeking for networks of disturbed linear agents."""

from .game import AggregativeCost, GameModel, monotonicity_certificate, nash_equilibrium
from .graph import Graph
from .plant import AgentPlant, Exosystem, Gains, verify_conditions
from .rules import Agent, Mode, Network
from .scenario import ConfigError, load, loads
from .sim import ScenarioConfig, Trajectory, integrate, settling_time

__version__ = "0.1.0"

__all__ = [
    "AggregativeCost", "GameModel", "monotonicity_certificate", "nash_equilibrium",
    "Graph", "AgentPlant", "Exosystem", "Gains", "verify_conditions",
    "Agent", "Mode", "Network", "ConfigError", "load", "loads",
    "ScenarioConfig", "Trajectory", "integrate", "settling_time",
]
