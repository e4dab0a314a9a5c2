"""
ulab: uniformity lab for bounded multiplicative functions.
Sieved function tables, Gowers and weak Gowers norms on short intervals,
pretentious distances, sign patterns, averaged correlations, and the exact
polynomial / nilpotent-group algebra behind them.
"""

__version__ = "1.0.0"
