"""Constructive-interference multi-cell precoding: models, solvers and experiments."""

__version__ = "0.1.0"
