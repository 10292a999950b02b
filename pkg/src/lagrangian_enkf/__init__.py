"""Ensemble Kalman filtering for particle (Lagrangian) discretisations."""

__version__ = "0.1.0"
