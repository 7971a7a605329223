"""Event-triggered diffusion cubature information filtering for multi-sensor target tracking."""
from .config import ExperimentConfig, FilterConfig, FusionConfig, load_config
from .pipeline import AlgoVariant, run, run_many
from .scenario import ScenarioConfig

__version__ = "0.1.0"

__all__ = [
    "AlgoVariant",
    "ExperimentConfig",
    "FilterConfig",
    "FusionConfig",
    "ScenarioConfig",
    "load_config",
    "run",
    "run_many",
]
