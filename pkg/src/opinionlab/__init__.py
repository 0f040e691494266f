"""Exact and Monte Carlo tools for hierarchical voting and public debate opinion models."""

__version__ = "0.1.0"

from .core import (  # noqa: F401
    DebateSpec,
    HierarchySpec,
    Opinion,
    ResourceBudgetError,
    RngSeed,
    Rule,
    binomial,
    multinomial,
)
