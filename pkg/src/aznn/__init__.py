"""Adapted Zhang neural networks for time-varying matrix square roots and symmetrizers."""

__version__ = "0.1.0"
