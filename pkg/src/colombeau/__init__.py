"""Sampled computation in Colombeau algebras of generalized functions."""

__version__ = "0.1.0"
