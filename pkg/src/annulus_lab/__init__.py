"""Numerical laboratory for lattice points in thin planar annuli.

Enumerates the points, partitions them into caps, synthesizes the kernel
whose frequencies they are, counts additive energies, evaluates the
mollified Poisson sums, and tracks which (p, alpha) regimes of the two
norm conjectures are settled.
"""

from .errors import (ArgumentError, CapacityError, InputRangeError, IntegrityError,
                     LabError, NumericalError)
from .lattice import AnnulusSpec, CurveSpec, LatticeSet, enumerate_annulus, r2

__all__ = [
    "AnnulusSpec", "CurveSpec", "LatticeSet", "enumerate_annulus", "r2",
    "LabError", "ArgumentError", "InputRangeError", "CapacityError",
    "NumericalError", "IntegrityError",
]
__version__ = "0.1.0"
