"""Procedural forest scenes, physics-based UAV laser-scan simulation, and
machine-learning-ready point-cloud datasets."""

__version__ = "0.1.0"
