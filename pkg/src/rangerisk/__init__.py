"""Range-based risk measures for elliptical and log-elliptical models."""

__version__ = "0.1.0"
