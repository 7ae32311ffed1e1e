"""Shapes that finitely many measures cannot tell apart, and families that can.

The subpackages split the work:

``geometry``
    boxes, cubes and axis-aligned images of symmetric bodies;
``measures``
    polynomial densities and their exact moments over those shapes;
``certificates``
    measure families that distinguish every shape, with their inversions;
``search``
    numerical witnesses for tuples of shapes with equal moments;
``cli`` / ``report``
    command-line runs, CSV tables and figures.
"""

from .geometry import AxisTransform, Cube, Cuboid, OrbitShape, ShapeParams, SymmetricBody
from .measures import Domain, MeasureFamily, PolyDensity, measure_vector
from .certificates import CertificateKind, family_densities, reconstruct, solve_lemma_moment
from .search import SearchConfig, SearchProblem, find_indiscernible_tuple, verify_witness

__version__ = "0.1.0"

__all__ = [
    "AxisTransform",
    "CertificateKind",
    "Cube",
    "Cuboid",
    "Domain",
    "MeasureFamily",
    "OrbitShape",
    "PolyDensity",
    "SearchConfig",
    "SearchProblem",
    "ShapeParams",
    "SymmetricBody",
    "family_densities",
    "find_indiscernible_tuple",
    "measure_vector",
    "reconstruct",
    "solve_lemma_moment",
    "verify_witness",
]
