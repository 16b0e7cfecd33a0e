"""Exact density-matrix simulation of weak-measurement Leggett-Garg and time-order tests."""

__version__ = "0.1.0"
