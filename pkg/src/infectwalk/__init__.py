"""Simulator and analysis toolkit for A/B random-walk infection with recuperation."""

__version__ = "0.1.0"
