"""Exact Bayesian inference for variable-memory Markov chains."""

from __future__ import annotations

from ._backend import BACKEND
from ._errors import BayesCTError, DataError, NodeBudgetExceeded, ResourceCapError

__version__ = "0.1.0"

__all__ = [
    "BACKEND",
    "BayesCTError",
    "DataError",
    "NodeBudgetExceeded",
    "ResourceCapError",
]
