"""2D transformation-based cloaking toolkit.

Submodules: bessel (independent special-function oracle), meshgen
(structured triangulations), xform (diffeomorphisms and coefficient
push-forward), fem (P1 assembly and eigensolves), dtn (boundary
Dirichlet-to-Neumann operators), spectra (the three spectral problems),
cloak (regularized cloaking experiments), cli (batch front door).
"""

from . import bessel, cloak, dtn, fem, meshgen, spectra, xform  # noqa: F401

__version__ = "0.1.0"
