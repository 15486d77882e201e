"""Lattice interface models, height maps and skew interacting diffusions."""

from .domain import Domain, Grid, build_grid, margin_check, DegenerateGridError
from .heightmap import (
    Archetype,
    HeightMap,
    make_archetype,
    check_condition,
    gram_matrix,
    coercivity_constant,
    l2_square,
)

__version__ = "0.1.0"
