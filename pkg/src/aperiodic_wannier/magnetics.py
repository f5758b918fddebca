"""Uniform magnetic twists: the phase cocycle and magnetic translations.

The twist is stored as a real antisymmetric matrix theta.  The pair phase is
sigma(x, y) = exp(-i <x, theta y>); the physical field strength (flux per unit
area in a coordinate plane) is twice the corresponding theta entry, which is
what ``uniform_field`` accepts so callers can think in flux units.

Magnetic translations act as (U_a psi)(x) = exp(-i <x, theta a>) psi(x - a)
and compose projectively: U_a U_b = conj(sigma(a, b)) U_{a+b}.
"""
from __future__ import annotations

import numpy as np

from .bases import GridBasis, SiteBasis


class MagneticCocycle:
    """Antisymmetric twist matrix with the derived pair phases."""

    def __init__(self, theta):
        th = np.array(theta, dtype=float)
        if th.ndim != 2 or th.shape[0] != th.shape[1]:
            raise ValueError(f"theta must be square, got shape {th.shape}")
        if not np.allclose(th, -th.T, atol=1e-12):
            raise ValueError("theta must be antisymmetric")
        th = (th - th.T) / 2  # kill roundoff asymmetry
        th.setflags(write=False)
        self.theta = th
        self.dim = th.shape[0]

    @classmethod
    def zero(cls, dim: int) -> "MagneticCocycle":
        return cls(np.zeros((dim, dim)))

    @classmethod
    def uniform_field(cls, b: float, dim: int = 2, plane: tuple[int, int] = (0, 1)) -> "MagneticCocycle":
        """Field strength b through the given coordinate plane: theta_ij = b/2."""
        th = np.zeros((dim, dim))
        i, j = plane
        th[i, j] = b / 2
        th[j, i] = -b / 2
        return cls(th)

    @classmethod
    def from_upper_triangle(cls, dim: int, entries) -> "MagneticCocycle":
        """theta from its strict upper triangle, row-major."""
        vals = np.asarray(entries, dtype=float)
        expect = dim * (dim - 1) // 2
        if vals.shape != (expect,):
            raise ValueError(f"need {expect} upper-triangle entries for dim {dim}, got {vals.shape}")
        th = np.zeros((dim, dim))
        th[np.triu_indices(dim, k=1)] = vals
        return cls(th - th.T)

    @property
    def field(self) -> float:
        """Flux per unit area in the (0, 1) plane."""
        if self.dim < 2:
            return 0.0
        return 2.0 * float(self.theta[0, 1])

    def upper_triangle(self) -> np.ndarray:
        return self.theta[np.triu_indices(self.dim, k=1)]

    def pairing(self, x, y) -> np.ndarray:
        """<x, theta y>, broadcasting over leading axes of x and y."""
        return np.einsum("...i,ij,...j->...", np.asarray(x, float), self.theta,
                         np.asarray(y, float))

    def sigma(self, x, y) -> np.ndarray:
        return np.exp(-1j * self.pairing(x, y))

    def __eq__(self, other):
        return isinstance(other, MagneticCocycle) and np.array_equal(self.theta, other.theta)

    def __repr__(self):
        return f"MagneticCocycle(theta={self.theta.tolist()})"


def cocycle_residual(c: MagneticCocycle, x, y, z) -> np.ndarray:
    """|sigma(x,y) sigma(x+y,z) - sigma(y,z) sigma(x,y+z)|, elementwise."""
    x, y, z = (np.asarray(v, float) for v in (x, y, z))
    lhs = c.sigma(x, y) * c.sigma(x + y, z)
    rhs = c.sigma(y, z) * c.sigma(x, y + z)
    return np.abs(lhs - rhs)


def inverse_conjugation_residual(c: MagneticCocycle, x, y) -> np.ndarray:
    """|sigma(x,y) * conj(sigma(y,x)) - sigma(x,y)^2| checks sigma(y,x) = conj(sigma(x,y));
    and |sigma(x,-x) - 1| checks normalization on inverses.  Returns the max of both."""
    x, y = np.asarray(x, float), np.asarray(y, float)
    swap = np.abs(c.sigma(y, x) - np.conj(c.sigma(x, y)))
    inv = np.abs(c.sigma(x, -x) - 1.0)
    return np.maximum(swap, inv)


def translate(c: MagneticCocycle, a, vec: np.ndarray, basis) -> np.ndarray:
    """Apply the magnetic translation U_a to a vector on a grid or site basis.

    On a grid ``a`` must be commensurate with the pitch and the shift is
    zero-filled at the open boundary.  On a site basis every target site takes
    its value from the site at x - a when that site exists, else zero; source
    sites are located by rounded-coordinate lookup.
    """
    a = np.asarray(a, dtype=float)
    x = basis.positions()
    phase = np.exp(-1j * c.pairing(x, a))
    if isinstance(basis, GridBasis):
        return phase * basis.shift(np.asarray(vec, dtype=complex), a)
    if isinstance(basis, SiteBasis):
        lut = basis.index_map()
        out = np.zeros(basis.n, dtype=complex)
        src_pts = x - a
        for i, p in enumerate(src_pts):
            j = lut.get(tuple(np.round(p, 6)))
            if j is not None:
                out[i] = vec[j]
        return phase * out
    raise TypeError(f"unsupported basis {type(basis).__name__}")


def translation_operator(c: MagneticCocycle, a, basis) -> np.ndarray:
    """Dense matrix of U_a (unitary on the infinite pattern, a partial isometry
    on a finite window)."""
    n = basis.n
    U = np.zeros((n, n), dtype=complex)
    eye = np.eye(n)
    for k in range(n):
        U[:, k] = translate(c, a, eye[:, k], basis)
    return U
