"""Curvature histograms, independence statistics and the Monte Carlo runner."""

from .histogram import (BinGrid, BoundaryAccumulator, BoundaryMeasure, CurvatureHistogram,
                        EdgeProfile, OracleComparison, VertexMass, bin_histogram,
                        boundary_decomposition, integrate_bins, oracle_compare,
                        per_sample_matrix)
from .runner import BLOCK, ExcessiveRejection, ExperimentReport, run_experiment
from .export import CSV_COLUMNS, write_outputs
from .stats import JointAccumulator, covariance_test, factorization_test, region_matrix

__all__ = [
    "BinGrid", "BoundaryAccumulator", "BoundaryMeasure", "CurvatureHistogram", "EdgeProfile",
    "OracleComparison", "VertexMass", "bin_histogram", "boundary_decomposition",
    "integrate_bins", "oracle_compare", "per_sample_matrix", "BLOCK", "ExcessiveRejection",
    "ExperimentReport", "run_experiment", "JointAccumulator", "covariance_test",
    "factorization_test", "region_matrix", "CSV_COLUMNS", "write_outputs",
]
