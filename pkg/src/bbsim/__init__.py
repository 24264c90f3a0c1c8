"""Blank Burst coexistence simulator for 6LoWPAN/WLAN area networks."""

from .config import ScenarioConfig, load_config, parse_config
from .network import RunResult, simulate
from .scheduler import Klass, Mode

__all__ = ["ScenarioConfig", "load_config", "parse_config", "simulate", "RunResult", "Klass", "Mode"]
