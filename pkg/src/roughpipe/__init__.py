"""Wall laws for viscous flow in randomly rough pipes: geometry, solvers, boundary layers and verification."""

__version__ = "0.1.0"
