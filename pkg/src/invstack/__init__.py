"""Inverse Stackelberg (incentive) game solvers."""

__version__ = "0.1.0"
