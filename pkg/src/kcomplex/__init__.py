"""Exact verification of elliptic complexes on quaternionic Kahler manifolds."""

__version__ = "0.1.0"
