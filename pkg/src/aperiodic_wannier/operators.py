"""Kernel operators on finite windows.

An operator is stored as a dense complex kernel over a basis, with the twist
phase baked into the matrix elements: a hopping amplitude t between sites p, q
enters as t(q - p) * sigma(p, q).  With this convention operator composition
is plain matrix multiplication and the covariance identity under magnetic
translations holds exactly on finite windows (no boundary correction): moving
every site by -a conjugates the kernel by the diagonal phase exp(+i<x, theta a>).
"""
from __future__ import annotations

import itertools
import json
import math
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy.spatial import cKDTree

from .bases import GridBasis, SiteBasis, check_same_basis
from .errors import FormatError, NonHermitian, PotentialNotCompact, RealShift
from .magnetics import MagneticCocycle
from .pointsets import DeloneSet

_HERM_TOL = 1e-10


@dataclass(frozen=True)
class KernelOperator:
    matrix: np.ndarray
    basis: object

    def __post_init__(self):
        m = np.asarray(self.matrix)
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise ValueError(f"kernel must be square, got shape {m.shape}")
        if m.shape[0] != self.basis.n:
            raise ValueError(f"kernel size {m.shape[0]} does not match basis size {self.basis.n}")
        m = np.ascontiguousarray(m, dtype=complex)
        m.setflags(write=False)
        object.__setattr__(self, "matrix", m)

    @property
    def n(self) -> int:
        return self.matrix.shape[0]

    def hermiticity_defect(self) -> float:
        return float(np.max(np.abs(self.matrix - self.matrix.conj().T)))

    def require_hermitian(self, tol: float = _HERM_TOL) -> None:
        defect = self.hermiticity_defect()
        scale = max(1.0, float(np.max(np.abs(self.matrix))))
        if defect > tol * scale:
            raise NonHermitian(f"kernel deviates from self-adjointness by {defect:.3e}",
                               defect=defect, scale=scale)


@dataclass(frozen=True)
class HoppingProfile:
    """Translation-covariant hopping amplitude with a finite range.

    ``amplitude`` maps an (m, d) array of displacements q - p to complex
    amplitudes; it is only evaluated inside the cutoff.  Self-adjointness
    requires amplitude(-v) = conj(amplitude(v)); this is enforced on the
    assembled kernel rather than symbolically.
    """
    amplitude: Callable[[np.ndarray], np.ndarray]
    cutoff: float


def constant_hopping(t: float | complex, cutoff: float) -> HoppingProfile:
    return HoppingProfile(lambda v: np.full(len(v), complex(t)), cutoff)


@dataclass(frozen=True)
class CompactPotential:
    """Real potential with a declared support radius around each of its wells."""
    fn: Callable[[np.ndarray], np.ndarray]
    radius: float

    def __call__(self, x: np.ndarray) -> np.ndarray:
        return np.asarray(self.fn(x), dtype=float)


def assemble_tightbinding(sites: DeloneSet | SiteBasis, cocycle: MagneticCocycle,
                          hopping: HoppingProfile, onsite=None) -> KernelOperator:
    """Twisted tight-binding kernel M[p, q] = t(q - p) sigma(p, q) + diag(onsite).

    Parameters
    ----------
    sites : DeloneSet or SiteBasis
    cocycle : MagneticCocycle
    hopping : HoppingProfile
    onsite : scalar, array, or callable mapping positions to real values.

    Raises
    ------
    NonHermitian
        If the assembled kernel is not self-adjoint (asymmetric amplitude or
        complex onsite term).
    """
    basis = SiteBasis(sites.points) if isinstance(sites, DeloneSet) else sites
    x = basis.positions()
    n = basis.n
    M = np.zeros((n, n), dtype=complex)
    pairs = cKDTree(x).query_pairs(hopping.cutoff, output_type="ndarray")
    if len(pairs):
        i, j = pairs[:, 0], pairs[:, 1]
        t_ij = np.asarray(hopping.amplitude(x[j] - x[i]), dtype=complex)
        t_ji = np.asarray(hopping.amplitude(x[i] - x[j]), dtype=complex)
        M[i, j] = t_ij * cocycle.sigma(x[i], x[j])
        M[j, i] = t_ji * cocycle.sigma(x[j], x[i])
    if onsite is not None:
        v = onsite(x) if callable(onsite) else onsite
        v = np.broadcast_to(np.asarray(v), (n,))
        if np.iscomplexobj(v) and np.max(np.abs(np.imag(v))) > 1e-14:
            raise NonHermitian("onsite term must be real", max_imag=float(np.max(np.abs(np.imag(v)))))
        M[np.diag_indices(n)] += np.real(v)
    op = KernelOperator(M, basis)
    op.require_hermitian()
    return op


def assemble_continuum(window, pitch: float, cocycle: MagneticCocycle,
                       potential: CompactPotential | None = None,
                       boundary: str = "open") -> KernelOperator:
    """Finite-difference magnetic Schroedinger operator on a grid.

    The kinetic part is the 2d+1 stencil of -Laplacian with minimal coupling
    to the linear gauge A(x) = -theta x: diagonal 2d/h^2, nearest-neighbour
    hops -sigma(p, q)/h^2.  ``boundary`` is "open" (zero outside) or
    "periodic"; periodic wrapping is only defined for zero twist because a
    uniform field is not commensurate with a torus of arbitrary size.

    Raises
    ------
    PotentialNotCompact
        If ``potential`` is a bare callable without a declared support radius.
    """
    if potential is not None and not isinstance(potential, CompactPotential):
        raise PotentialNotCompact("wrap the potential in CompactPotential to declare its support",
                                  got=type(potential).__name__)
    if boundary not in ("open", "periodic"):
        raise ValueError(f"unknown boundary {boundary!r}")
    if boundary == "periodic" and np.any(cocycle.theta != 0):
        raise ValueError("periodic boundaries are only defined at zero twist")
    basis = GridBasis(window, pitch)
    x = basis.positions()
    n = basis.n
    d = basis.dim
    h2 = pitch * pitch
    M = np.zeros((n, n), dtype=complex)
    M[np.diag_indices(n)] = 2 * d / h2
    idx = np.arange(n).reshape(basis.shape)
    for axis in range(d):
        src = np.moveaxis(idx, axis, 0)[:-1].ravel()
        dst = np.moveaxis(idx, axis, 0)[1:].ravel()
        M[src, dst] = -cocycle.sigma(x[src], x[dst]) / h2
        M[dst, src] = -cocycle.sigma(x[dst], x[src]) / h2
        if boundary == "periodic":
            last = np.moveaxis(idx, axis, 0)[-1].ravel()
            first = np.moveaxis(idx, axis, 0)[0].ravel()
            M[last, first] = -1.0 / h2
            M[first, last] = -1.0 / h2
    if potential is not None:
        M[np.diag_indices(n)] += potential(x)
    op = KernelOperator(M, basis)
    op.require_hermitian()
    return op


def twisted_convolve(f: KernelOperator, g: KernelOperator) -> KernelOperator:
    """Composition of kernels; with twist phases baked in this is matmul."""
    check_same_basis(f.basis, g.basis)
    return KernelOperator(f.matrix @ g.matrix, f.basis)


# ---------------------------------------------------------------------------
# derivations and seminorms


def position_derivative(op: KernelOperator, axis: int) -> KernelOperator:
    """Commutator with the position operator: (d_j f)[p, q] = (p - q)_j f[p, q]."""
    x = op.basis.positions()
    dx = x[:, axis][:, None] - x[:, axis][None, :]
    return KernelOperator(dx * op.matrix, op.basis)


def multi_indices(dim: int, order: int):
    """All multi-indices alpha with |alpha| <= order, graded lexicographic."""
    for total in range(order + 1):
        for alpha in itertools.product(range(total + 1), repeat=dim):
            if sum(alpha) == total:
                yield alpha


def iterated_derivative(op: KernelOperator, alpha) -> KernelOperator:
    x = op.basis.positions()
    weight = np.ones((op.n, op.n))
    for axis, power in enumerate(alpha):
        if power:
            dx = x[:, axis][:, None] - x[:, axis][None, :]
            weight = weight * dx**power
    return KernelOperator(weight * op.matrix, op.basis)


def frechet_seminorm(op: KernelOperator, order: int) -> float:
    """sum over |alpha| <= order of ||d^alpha f|| / alpha!.

    Submultiplicative under twisted convolution with constant 1: the Leibniz
    expansion of d^alpha(f g) maps termwise into the product of the two sums.
    """
    total = 0.0
    for alpha in multi_indices(op.basis.dim, order):
        fact = 1.0
        for p in alpha:
            fact *= math.factorial(p)
        total += operator_norm(iterated_derivative(op, alpha).matrix) / fact
    return total


# ---------------------------------------------------------------------------
# norms and resolvents

_DENSE_NORM_DIM = 64


def operator_norm(mat: np.ndarray, tol: float = 1e-9, max_iter: int = 2000) -> float:
    """Spectral norm: exact SVD up to dimension 64, then power iteration on
    A^H A from a fixed seeded start (deterministic across runs)."""
    m = np.asarray(mat)
    if min(m.shape) <= _DENSE_NORM_DIM:
        return float(np.linalg.norm(m, 2))
    rng = np.random.default_rng(0x5EED)
    v = rng.normal(size=m.shape[1]) + 1j * rng.normal(size=m.shape[1])
    v /= np.linalg.norm(v)
    prev = 0.0
    for _ in range(max_iter):
        w = m @ v
        s = np.linalg.norm(w)
        if s == 0.0:
            return 0.0
        v = m.conj().T @ w
        nv = np.linalg.norm(v)
        v /= nv
        if abs(s - prev) <= tol * max(s, 1e-300):
            break
        prev = s
    return float(np.sqrt(nv))


def resolvent(op: KernelOperator, z: complex) -> np.ndarray:
    """(H - z)^{-1} as a dense matrix."""
    return np.linalg.inv(op.matrix - z * np.eye(op.n))


def resolvent_difference_check(h1: KernelOperator, h2: KernelOperator, z: complex) -> dict:
    """Second-resolvent bound ||R1 - R2|| <= ||H1 - H2|| ||R1|| ||R2||.

    Returns both sides; the inequality is an identity-level bound, so lhs
    exceeding rhs beyond roundoff indicates an assembly bug.

    Raises
    ------
    RealShift
        If z sits on the real axis, where the resolvents need not exist.
    """
    check_same_basis(h1.basis, h2.basis)
    if complex(z).imag == 0.0:
        raise RealShift("resolvent continuity needs Im z != 0", z=[complex(z).real, 0.0])
    r1 = resolvent(h1, z)
    r2 = resolvent(h2, z)
    lhs = operator_norm(r1 - r2)
    vnorm = operator_norm(h1.matrix - h2.matrix)
    rhs = vnorm * operator_norm(r1) * operator_norm(r2)
    return {"lhs": lhs, "rhs": rhs, "perturbation_norm": vnorm, "holds": bool(lhs <= rhs * (1 + 1e-10))}


# ---------------------------------------------------------------------------
# container format: one JSON header line, then row-major little-endian
# complex128 kernel bytes


def save_operator(op: KernelOperator, path) -> None:
    header = {
        "format": "kernel-operator",
        "version": 1,
        "n": op.n,
        "dtype": "complex128",
        "basis": op.basis.descriptor(),
    }
    with open(path, "wb") as fh:
        fh.write(json.dumps(header, sort_keys=True).encode() + b"\n")
        fh.write(np.ascontiguousarray(op.matrix, dtype="<c16").tobytes())


def load_operator(path) -> KernelOperator:
    with open(path, "rb") as fh:
        line = fh.readline()
        try:
            header = json.loads(line)
        except json.JSONDecodeError as exc:
            raise FormatError("operator file does not start with a JSON header line",
                              path=str(path)) from exc
        if header.get("format") != "kernel-operator" or header.get("version") != 1:
            raise FormatError("not a kernel-operator file", path=str(path), header=header)
        n = int(header["n"])
        raw = fh.read()
    expect = n * n * 16
    if len(raw) != expect:
        raise FormatError(f"payload holds {len(raw)} bytes, expected {expect}",
                          path=str(path))
    matrix = np.frombuffer(raw, dtype="<c16").reshape(n, n)
    desc = header["basis"]
    if desc["kind"] == "grid":
        basis = GridBasis(np.asarray(desc["window"]), desc["pitch"])
    elif desc["kind"] == "sites":
        basis = SiteBasis(np.asarray(desc["points"]))
    else:
        raise FormatError(f"unknown basis kind {desc.get('kind')!r}", path=str(path))
    if basis.n != n:
        raise FormatError("basis size disagrees with kernel size", path=str(path))
    return KernelOperator(matrix, basis)
