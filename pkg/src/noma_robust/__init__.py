"""Robust beamforming for NOMA MISO downlinks with bounded channel errors."""

__version__ = "0.1.0"
