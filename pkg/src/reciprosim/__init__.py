"""Deterministic reciprocity simulator with log-based macrostate detection."""

from .config import ExperimentSpec, load_config
from .detectors import (
    DetectorParams,
    detect_credit,
    detect_insurance,
    detect_investment,
    detect_token_chains,
    oracle_credit,
)
from .engine import init_world, run, run_world, step
from .events import Event, EventLog, Kind, parse_log, read_log
from .experiments import compare, run_experiment
from .reports import MacrostateReport, summarize
from .scenarios import ScenarioConfig, make_scenario
from .world import replay

__version__ = "0.1.0"

__all__ = [
    "DetectorParams",
    "Event",
    "EventLog",
    "ExperimentSpec",
    "Kind",
    "MacrostateReport",
    "ScenarioConfig",
    "compare",
    "detect_credit",
    "detect_insurance",
    "detect_investment",
    "detect_token_chains",
    "init_world",
    "load_config",
    "make_scenario",
    "oracle_credit",
    "parse_log",
    "read_log",
    "replay",
    "run",
    "run_experiment",
    "run_world",
    "step",
    "summarize",
]
