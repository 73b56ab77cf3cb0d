"""Blow-up analysis toolkit for coupled semilinear wave systems with scale-invariant damping and mass."""
from __future__ import annotations

from .model import Regime, RegimeReport, SystemParams, classify, pq_grid
from .solver import GridSpec, InitialData, LifespanRecord, run_lifespan

__version__ = "0.1.0"

__all__ = [
    "GridSpec",
    "InitialData",
    "LifespanRecord",
    "Regime",
    "RegimeReport",
    "SystemParams",
    "classify",
    "pq_grid",
    "run_lifespan",
]
