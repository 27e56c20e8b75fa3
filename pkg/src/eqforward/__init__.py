"""Equilibrium forward electricity contract prices from welfare-maximization duals."""

__version__ = "0.1.0"
