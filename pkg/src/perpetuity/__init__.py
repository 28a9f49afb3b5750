"""Tail bounds and simulation for perpetuities ``R = q + M R`` with multipliers on [0, 1]."""

__version__ = "0.1.0"
