"""Variationally constrained Gaussian processes for uncertain and partial inputs."""

__version__ = "0.1.0"
