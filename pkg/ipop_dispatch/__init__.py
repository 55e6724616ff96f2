"""Efficiency-optimal load dispatch for input-parallel output-parallel converter modules."""

__version__ = "0.1.0"
