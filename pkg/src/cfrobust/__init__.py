"""Robust linear precoding for cell-free MU-MIMO downlinks under imperfect CSIT."""

__version__ = "0.1.0"

SCHEMES = ("MMSE", "MMSE-RB", "MMSE-RB-SP", "MMSE-RB-RD")
