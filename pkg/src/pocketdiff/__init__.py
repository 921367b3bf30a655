"""Pocket-conditioned diffusion over 3D molecular graphs."""

__version__ = "0.1.0"
