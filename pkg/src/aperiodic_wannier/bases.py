"""Site bases: the index sets kernels and vectors live on.

A basis is either a regular grid filling a rectangular window (continuum
discretizations) or an explicit list of sites (tight-binding models on point
sets).  Both expose ``positions()`` as an (n, d) array in a fixed order, which
is the only thing most of the package needs; the grid additionally supports
exact shifting by lattice vectors.
"""
from __future__ import annotations

import numpy as np

from .errors import BasisMismatch, EmptyWindow


def _as_window(window) -> np.ndarray:
    w = np.asarray(window, dtype=float)
    if w.ndim != 2 or w.shape[1] != 2:
        raise ValueError(f"window must have shape (d, 2), got {w.shape}")
    if np.any(w[:, 1] <= w[:, 0]):
        raise EmptyWindow("window has a non-positive extent", window=w.tolist())
    return w


class GridBasis:
    """Regular grid with spacing ``pitch`` starting at the window's low corner.

    Grid points are ``lo + k * pitch`` per axis, kept while they fit in the
    window; the flattened index is row-major in the first axis (x-major).
    """

    def __init__(self, window, pitch: float):
        self.window = _as_window(window)
        self.pitch = float(pitch)
        if self.pitch <= 0:
            raise ValueError("pitch must be positive")
        counts = np.floor((self.window[:, 1] - self.window[:, 0]) / self.pitch + 1e-9).astype(int) + 1
        if np.any(counts < 2):
            raise EmptyWindow("window shorter than one pitch along some axis",
                              window=self.window.tolist(), pitch=self.pitch)
        self.shape = tuple(int(c) for c in counts)
        self.n = int(np.prod(counts))
        self.dim = self.window.shape[0]
        axes = [self.window[j, 0] + self.pitch * np.arange(self.shape[j]) for j in range(self.dim)]
        mesh = np.meshgrid(*axes, indexing="ij")
        self._positions = np.column_stack([m.ravel() for m in mesh])
        self._positions.setflags(write=False)

    def positions(self) -> np.ndarray:
        return self._positions

    def steps_of(self, a) -> np.ndarray:
        """Integer grid steps for a shift vector; raises if not commensurate."""
        a = np.asarray(a, dtype=float)
        steps = a / self.pitch
        rounded = np.rint(steps)
        if np.max(np.abs(steps - rounded)) > 1e-9:
            raise ValueError(f"shift {a.tolist()} is not a multiple of pitch {self.pitch}")
        return rounded.astype(int)

    def shift(self, vec: np.ndarray, a) -> np.ndarray:
        """(shift_a psi)(x) = psi(x - a), zero-filled at the open boundary."""
        steps = self.steps_of(a)
        field = np.asarray(vec).reshape(self.shape)
        out = np.zeros_like(field)
        src = [slice(None)] * self.dim
        dst = [slice(None)] * self.dim
        for j, s in enumerate(steps):
            if abs(s) >= self.shape[j]:
                return out.reshape(vec.shape)
            if s >= 0:
                dst[j] = slice(s, None)
                src[j] = slice(None, self.shape[j] - s)
            else:
                dst[j] = slice(None, self.shape[j] + s)
                src[j] = slice(-s, None)
        out[tuple(dst)] = field[tuple(src)]
        return out.reshape(vec.shape)

    def descriptor(self) -> dict:
        return {"kind": "grid", "window": self.window.tolist(), "pitch": self.pitch}

    def __eq__(self, other):
        return (isinstance(other, GridBasis) and self.shape == other.shape
                and abs(self.pitch - other.pitch) < 1e-12
                and np.allclose(self.window, other.window, atol=1e-12))

    def __repr__(self):
        return f"GridBasis(shape={self.shape}, pitch={self.pitch})"


class SiteBasis:
    """Explicit list of sites, in the order they were handed over."""

    def __init__(self, points):
        pts = np.array(points, dtype=float)
        if pts.ndim != 2 or len(pts) == 0:
            raise ValueError(f"points must be a nonempty (n, d) array, got shape {pts.shape}")
        pts.setflags(write=False)
        self._positions = pts
        self.n = len(pts)
        self.dim = pts.shape[1]

    def positions(self) -> np.ndarray:
        return self._positions

    def index_map(self, decimals: int = 6) -> dict:
        """Rounded-coordinate lookup used to realize translations on sites."""
        return {tuple(np.round(p, decimals)): i for i, p in enumerate(self._positions)}

    def descriptor(self) -> dict:
        return {"kind": "sites", "points": self._positions.tolist()}

    def __eq__(self, other):
        return (isinstance(other, SiteBasis) and self.n == other.n
                and np.array_equal(self._positions, other._positions))

    def __repr__(self):
        return f"SiteBasis(n={self.n}, dim={self.dim})"


def check_same_basis(a, b) -> None:
    if a != b:
        raise BasisMismatch("operands live on different bases", left=repr(a), right=repr(b))
