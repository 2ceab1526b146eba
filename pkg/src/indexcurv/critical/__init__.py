"""Critical points, Poincare-Hopf indices and the completeness certificate."""

from .boundary import BoundaryCurves, edge_critical, vertex_points
from .finder import hessian_index, hessian_sign, interior_search, morse_data, newton
from .links import LinkGeometry, batch_link_index, count_index, link_index
from .points import (EDGE, INTERIOR, KIND_NAMES, VERTEX, AmbiguousLink, CompletenessUncertified,
                     CriticalPoint, CriticalSet, DegenerateCritical, IndexAtom, SolverOptions)
from .solve import (DEGENERATE, OK, STATUS_NAMES, UNCERTIFIED, BlockResult, Certificate,
                    ProductResult, block_product_atoms, boundary_scan, find_critical_points,
                    pair_rows, poincare_hopf_sum, solve, solve_batch, solve_product)

__all__ = [name for name in dir() if not name.startswith("_")]
