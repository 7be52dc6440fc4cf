"""Supermartingale optimal transport on the real line for finitely supported measures."""

from .coupling import FiniteCoupling, aw_distance, compose
from .decomposition import IrreducibleDecomposition, decompose_coupling, irreducible_components, x_star
from .errors import SmotError
from .measure import (
    DiscreteMeasure,
    Interval,
    inf_c,
    inf_cd,
    leq_c,
    leq_cd,
    sup_cd,
    wasserstein,
)
from .potential import PiecewiseLinear, measure_from_put, put_potential
from .strassen import feasible_martingale, feasible_supermartingale, quantitative_martingale

__version__ = "0.1.0"

__all__ = [
    "DiscreteMeasure",
    "FiniteCoupling",
    "Interval",
    "IrreducibleDecomposition",
    "PiecewiseLinear",
    "SmotError",
    "aw_distance",
    "compose",
    "decompose_coupling",
    "feasible_martingale",
    "feasible_supermartingale",
    "inf_c",
    "inf_cd",
    "irreducible_components",
    "leq_c",
    "leq_cd",
    "measure_from_put",
    "put_potential",
    "quantitative_martingale",
    "sup_cd",
    "wasserstein",
    "x_star",
]
