"""Photon-counting optical coherence-domain reflectometry toolkit."""

__version__ = "0.1.0"
