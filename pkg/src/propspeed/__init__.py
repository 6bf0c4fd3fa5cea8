"""Finite propagation speed toolkit for discrete Schrödinger operators.

Submodules
----------
lattice
    Lattice boxes, potentials, matrix-free ``H`` and the dense oracle.
propagation
    Power moments and their exact vanishing/agreement checks.
poly_calculus
    Chebyshev/Jackson functional calculus and kernel decay bounds.
smoothfn
    Test-function families with exact derivative recurrences.
spectral_locality
    Local agreement of spectral measures for nearby potentials.
cosine_transform
    Cosine-transform coefficients and their decay bounds.
gevrey_comb
    Exact coefficient tables for derivatives of ``f(k**2)``.
cli
    Experiment runner.
"""

from propspeed.errors import (
    AccuracyError,
    DegenerateFitError,
    DomainError,
    EnclosureError,
    OracleLimitError,
    PropspeedError,
    ResourceError,
)

__version__ = "0.1.0"

__all__ = [
    "AccuracyError",
    "DegenerateFitError",
    "DomainError",
    "EnclosureError",
    "OracleLimitError",
    "PropspeedError",
    "ResourceError",
]
