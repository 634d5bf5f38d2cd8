"""Python access to the tocflow oracles and experiment drivers."""

import json
from typing import NamedTuple

from ._tocflow import (
    ConfigError,
    energy_spectrum,
    eta_lambda,
    fig1_curve,
    gamma_lambda,
    spectrum_residual,
    terminal_moments,
)
from ._tocflow import default_config as _default_config
from ._tocflow import run_experiment as _run_experiment

__all__ = [
    "Check",
    "ConfigError",
    "default_config",
    "energy_spectrum",
    "eta_lambda",
    "fig1_curve",
    "gamma_lambda",
    "run",
    "spectrum_residual",
    "terminal_moments",
]


class Check(NamedTuple):
    name: str
    value: float
    threshold: float
    passed: bool


def default_config(task):
    return json.loads(_default_config(task))


def run(task, config=None):
    """Run an experiment driver; returns (summary dict, list of Check)."""
    summary, checks = _run_experiment(task, json.dumps(config) if config else "")
    return json.loads(summary), [Check(*c) for c in checks]
