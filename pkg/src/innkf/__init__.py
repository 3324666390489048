"""Invariant neural-augmented Kalman filtering for legged robots."""

__version__ = "0.1.0"
