"""Quantum hyperbolic state sums on weakly branched ideal triangulations."""

from __future__ import annotations

__version__ = "0.1.0"
