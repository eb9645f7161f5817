"""Differential fuzzing middleware for RPKI relying-party validators.

Wraps arbitrary (possibly malformed) RPKI objects in complete, validly signed
repositories, serves them over RRDP, runs relying-party binaries against them,
and analyzes the outcomes for crashes, silent discards, and cross-validator
VRP inconsistencies.
"""

__version__ = "0.1.0"
