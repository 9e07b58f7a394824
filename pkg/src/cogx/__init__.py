"""Deterministic desk-scale simulator and benchmark harness for
language-guided robotic exploration."""

__version__ = "0.1.0"
