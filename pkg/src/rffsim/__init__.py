"""Desk-scale 5G SIMO simulator and RF-fingerprint identification toolkit."""

__version__ = "0.1.0"
