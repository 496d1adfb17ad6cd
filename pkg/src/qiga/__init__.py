"""Quantum-inspired genetic algorithms with a classical GA baseline."""

from .config import Settings, get_settings
from .engine import RunResult, run_algorithm, run_classical_ga, run_dqiga, run_qiga
from .fitness import FeatureSelectionProblem, KnapsackProblem, OneMaxProblem, Problem
from .models import EngineConfig, ExperimentSpec
from .qcore import BinaryChromosome, QuantumChromosome, Qubit
from .rotation import TestCase

__all__ = [
    "BinaryChromosome",
    "EngineConfig",
    "ExperimentSpec",
    "FeatureSelectionProblem",
    "KnapsackProblem",
    "OneMaxProblem",
    "Problem",
    "QuantumChromosome",
    "Qubit",
    "RunResult",
    "Settings",
    "TestCase",
    "get_settings",
    "run_algorithm",
    "run_classical_ga",
    "run_dqiga",
    "run_qiga",
]
