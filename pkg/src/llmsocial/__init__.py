"""Simulator and analytics toolkit for agents-only social networks."""

__version__ = "0.1.0"
