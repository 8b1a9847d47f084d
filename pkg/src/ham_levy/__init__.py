"""Exact path-wise laboratory for the 1D hyperbolic Anderson model driven by pure-jump Levy noise."""

__version__ = "0.1.0"
