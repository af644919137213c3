"""Skew convolution semigroups, entrance paths and Ornstein-Uhlenbeck simulation.

Modules:

* ``semigroup``: semigroup kinds on grids (matrix, heat, absorbing heat), kernels, resolvent.
* ``entrance``: entrance paths, the entrance norm and its weak resolvent norm, closability.
* ``sclaw``: infinitely divisible laws and SC-semigroup exponents.
* ``oupath``: Levy driver, OU construction and Monte Carlo checks.
* ``config`` / ``harness`` / ``cli``: experiment files, verification suites, command line.
"""

from .grid import Grid, GridFunction, ShapeError, vector
from .semigroup import (
    DomainError,
    SemigroupSpec,
    absorbing_halfline,
    heat_line,
    heat_plane,
    matrix_semigroup,
)

__version__ = "0.1.0"

__all__ = [
    "DomainError", "Grid", "GridFunction", "SemigroupSpec", "ShapeError", "absorbing_halfline",
    "heat_line", "heat_plane", "matrix_semigroup", "vector", "__version__",
]
