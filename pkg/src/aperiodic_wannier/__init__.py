"""Numerical toolkit for gapped spectral projections of magnetic operators on
Delone point sets: translate frames, localization statistics, real-space Chern
markers, and deformation stability.

Submodules are imported lazily by design; importing the package itself stays
cheap and numpy-free so the CLI can pin threading before numerics load.
"""

__version__ = "0.1.0"
