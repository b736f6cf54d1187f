"""
py-adc-dgd: decentralized gradient descent with compressed communication
"""

__version__ = "1.0.0"

from .core.engine import RunConfig, Trace, run, run_trials
from .core.config_loader import parse_config
from .core.presets import preset

__all__ = ["RunConfig", "Trace", "run", "run_trials", "parse_config", "preset"]
