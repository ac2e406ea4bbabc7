"""Stablecoin peg statistics, shock calibration and paired Monte Carlo stress tests."""

__version__ = "0.1.0"
