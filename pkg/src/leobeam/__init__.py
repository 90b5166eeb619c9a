"""Cognitive LEO uplink beamforming under limited radio-environment knowledge."""

__version__ = "0.1.0"
