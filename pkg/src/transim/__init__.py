"""Discrete-event simulator of microwave-optical quantum link strategies.

Compares a direct frequency-conversion link against a midpoint-heralded
entanglement link, validating Monte-Carlo estimates against closed-form
probabilities.
"""

from .analytics import (binomial_ci, compare, dqt_success_probability,
                        eqt_click_probability_pnrd, eqt_click_probability_spd,
                        spd_true_herald_fraction)
from .batch import run_batch, run_dqt_batch, run_eqt_batch
from .hardware import DetectorKind, Domain, PhotonOrigin
from .strategies import (ConfigError, DqtClass, ExperimentConfig, HeraldClass,
                         ResultsSummary, Strategy, TrialRecord, build_dqt,
                         build_eqt, classify_dqt, classify_eqt, run_dqt,
                         run_eqt, run_experiment, run_many)
from .timeline import RandomStream, Timeline

__version__ = "0.1.0"

__all__ = [
    "ConfigError",
    "DetectorKind",
    "Domain",
    "DqtClass",
    "ExperimentConfig",
    "HeraldClass",
    "PhotonOrigin",
    "RandomStream",
    "ResultsSummary",
    "Strategy",
    "Timeline",
    "TrialRecord",
    "binomial_ci",
    "build_dqt",
    "build_eqt",
    "classify_dqt",
    "classify_eqt",
    "compare",
    "dqt_success_probability",
    "eqt_click_probability_pnrd",
    "eqt_click_probability_spd",
    "run_batch",
    "run_dqt",
    "run_dqt_batch",
    "run_eqt",
    "run_eqt_batch",
    "run_experiment",
    "run_many",
    "spd_true_herald_fraction",
]
