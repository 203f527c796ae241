"""Collaborative filtering with graph-regularized rating profiles, plus
shilling-attack simulation and a robustness evaluation harness."""

__version__ = "0.1.0"
