"""Hyperbolic graph embeddings with hierarchy-informed regularisation."""

__version__ = "0.1.0"
