"""Integrated quantum optical projectors: coupler algebra, projective
measurement of single-photon path states, and coupler calibration."""

__version__ = "0.1.0"
