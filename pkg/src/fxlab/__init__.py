"""Fixation maximisation for the positional Moran process."""

__version__ = "0.1.0"
