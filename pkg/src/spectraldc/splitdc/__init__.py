"""Spectral divide and conquer by implicit repeated squaring."""
from .core import (IRSResult, SplitOutcome, StrategyConfig, backward_error_history, irs,
                   iteration_budget, iteration_budget_raw, line_pencil, projector_trace,
                   rgnep_step, rnep_step, rsep_step, split_select)
from .strategy import nonsym_strategy, pencil_strategy, rsvd_drive, sym_strategy
from .tree import Enclosure, SpectralTree

__all__ = [
    "IRSResult", "SplitOutcome", "StrategyConfig", "Enclosure", "SpectralTree",
    "irs", "split_select", "projector_trace", "line_pencil", "backward_error_history",
    "rgnep_step", "rnep_step", "rsep_step", "rsvd_drive",
    "nonsym_strategy", "sym_strategy", "pencil_strategy",
    "iteration_budget", "iteration_budget_raw",
]
