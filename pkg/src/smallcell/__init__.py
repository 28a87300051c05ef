"""
Smallcell - hierarchical downlink resource allocation for dense small-cell networks

This package simulates and analyses a four-step OFDMA allocation scheme:
- Cell association by highest average received power
- Per-AP load estimation (equal power or Newton on the KKT system)
- Centralized PRB allocation by DSATUR coloring of an interference graph
- Per-AP max-min normalized-rate scheduling
and compares it with a fixed random PRB allocation under full interference,
next to closed-form stochastic-geometry curves.
"""

__version__ = "0.1.0"
__author__ = "Project Smallcell Team"
