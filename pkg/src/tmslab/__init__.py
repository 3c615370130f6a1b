"""Finite-window laboratory for multidimensional topological Markov shifts."""

from .lattice import (
    AxisPairs,
    NeighborhoodTable,
    Pattern,
    ShiftSpace,
    SiteSet,
    axis_pairs_space,
    frontier,
    is_locally_admissible,
    shift_pattern,
)
from .enumeration import (
    EnumerationCapExceeded,
    check_irreducibility,
    count_patterns,
    enumerate_patterns,
)

__version__ = "0.1.0"
