"""Vertically federated random forests over an additively homomorphic cipher."""

__version__ = "0.1.0"
