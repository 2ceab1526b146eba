"""Monte Carlo index-expectation curvature on embedded surfaces."""

__version__ = "0.1.0"
