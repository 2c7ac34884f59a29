"""Exact symbolic hierarchies, scattering data and numerical flows for KdV-type equations."""

__version__ = "0.1.0"
