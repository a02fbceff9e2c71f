"""Finite-truncation toolkit for CCR and CAR flows over discrete convex cones."""

__version__ = "0.1.0"
