"""Simulation and analysis toolkit for GKP bosonic quantum error correction."""

__version__ = "0.1.0"

SQRT_PI = 1.7724538509055159
SQRT_2PI = 2.5066282746310002
