"""Simulation lab for propensity-score treatment-effect estimators."""

__version__ = "0.1.0"

from .cohort import Cohort, CoefficientSet, ScenarioSpec, generate_cohort  # noqa: E402
from .glm import DesignSpec, LogisticFit, fit_logistic, predict_proba  # noqa: E402
from .harness import ExperimentConfig, ExperimentSummary, run_experiment, run_replicate  # noqa: E402

__all__ = [
    "Cohort",
    "CoefficientSet",
    "ScenarioSpec",
    "generate_cohort",
    "DesignSpec",
    "LogisticFit",
    "fit_logistic",
    "predict_proba",
    "ExperimentConfig",
    "ExperimentSummary",
    "run_experiment",
    "run_replicate",
]
