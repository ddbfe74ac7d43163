"""Multi-index regularity structures for quasi-linear parabolic SPDEs.

Layers, bottom up: index combinatorics (`indices`), jet arithmetic
(`jets`), the graded series algebra (`series`), the structure group
(`group`), periodic space-time fields and the heat solver (`fields`),
the renormalized model (`model`), distributional calculus harnesses
(`calculus`), modelled distributions (`modelled`), and the renormalized
PDE solver (`solve`).  `cli` exposes the command-line entry point.
"""

from .indices import (Homogeneity, IndexSet, MultiIndex, critical_integers,
                      enumerate_populated, homogeneity)
from .jets import EllipticityWindow, Jet, JetBudgetError, JetError
from .series import Context, FormalSeries, GradedNorm, graded_norm

__all__ = [
    "Homogeneity", "IndexSet", "MultiIndex", "critical_integers",
    "enumerate_populated", "homogeneity",
    "EllipticityWindow", "Jet", "JetBudgetError", "JetError",
    "Context", "FormalSeries", "GradedNorm", "graded_norm",
]

__version__ = "0.1.0"
