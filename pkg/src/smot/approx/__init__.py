"""Constructive approximation of supermartingale couplings."""

from .params import PipelineParams, choose_params
from .pipeline import DEFAULT_SCHEDULE, PipelineTrace, approximate, run_component
from .stages import (
    build_target,
    complete,
    contract,
    correct_barycentres,
    final_adjust,
    localize,
    quantile_transfer,
    truncate,
)

__all__ = [
    "DEFAULT_SCHEDULE",
    "PipelineParams",
    "PipelineTrace",
    "approximate",
    "build_target",
    "choose_params",
    "complete",
    "contract",
    "correct_barycentres",
    "final_adjust",
    "localize",
    "quantile_transfer",
    "run_component",
    "truncate",
]
