"""Saliency-guided decode complexity control."""

__version__ = "0.1.0"
