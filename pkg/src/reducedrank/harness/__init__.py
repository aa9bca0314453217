"""Experiment harness: configuration, Monte Carlo engine, reports and CLI backends."""

from .complexity import OpCount, complexity_count
from .config import ExperimentConfig, parse_config
from .experiments import (LearningCurve, run_ber_vs_symbols, run_mse_vs_rank,
                          run_mse_vs_symbols)
from .report import emit_csv

__all__ = ["ExperimentConfig", "LearningCurve", "OpCount", "complexity_count", "emit_csv",
           "parse_config", "run_ber_vs_symbols", "run_mse_vs_rank", "run_mse_vs_symbols"]
