"""Decentralized global integral terminal sliding-mode load frequency control."""
from .control import GitsmcGains, PiGains
from .plant import AreaParameters, GeneratorParameters, MultiAreaPlant, TieLineTopology
from .sim import DivergenceError, ScenarioConfig, SimTrace, run_scenario

__version__ = "0.1.0"

__all__ = [
    "AreaParameters", "GeneratorParameters", "GitsmcGains", "MultiAreaPlant", "PiGains",
    "ScenarioConfig", "SimTrace", "TieLineTopology", "DivergenceError", "run_scenario",
    "__version__",
]
