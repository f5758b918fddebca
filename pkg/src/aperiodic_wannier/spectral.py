"""Spectra, gaps, and gapped spectral projections.

Two independent routes produce the projection onto the spectral window
delta = (lo, hi):

* ``eigensum``: full Hermitian diagonalization, summing eigenvector dyads.
* ``filter``: a near-minimax polynomial step filter evaluated on the operator
  by a Clenshaw recurrence.  This route never sees the eigendecomposition; it
  needs an a priori lower bound on the distance from the window endpoints to
  the spectrum (``gap_margin``) and encloses the spectrum with Gershgorin and
  norm bounds.

The two routes share nothing but the kernel, so their agreement is a real
cross-check.  Filter accuracy behaves like exp(-1.35 * degree * margin /
halfspan); for a spectrum symmetric about zero, degree = 12 ||H|| / margin
lands near 1e-7, and spectra shifted off symmetry converge much faster, which
is why the default degree carries a 14/12 safety factor.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import EndpointInSpectrum, GaplessBand
from .operators import KernelOperator, operator_norm


@dataclass(frozen=True)
class Gap:
    lo: float
    hi: float
    mid: float
    width: float
    index_below: int

    def as_dict(self) -> dict:
        return {"lo": self.lo, "hi": self.hi, "mid": self.mid,
                "width": self.width, "index_below": self.index_below}


def detect_gaps(evals: np.ndarray, min_gap: float) -> list[Gap]:
    """Open intervals between consecutive eigenvalues wider than min_gap."""
    ev = np.sort(np.asarray(evals, dtype=float))
    out = []
    for i in range(len(ev) - 1):
        w = ev[i + 1] - ev[i]
        if w > min_gap:
            out.append(Gap(lo=float(ev[i]), hi=float(ev[i + 1]),
                           mid=float(0.5 * (ev[i] + ev[i + 1])), width=float(w),
                           index_below=i + 1))
    return out


def select_gap(gaps: list[Gap], rule: str = "widest", within=None,
               rank: int | None = None, energy: float | None = None) -> Gap:
    """Pick one gap: 'widest' (optionally with midpoint inside ``within``),
    'rank' (exactly ``rank`` eigenvalues below), or 'energy' (contains it)."""
    cand = list(gaps)
    if rule == "widest":
        if within is not None:
            lo, hi = within
            cand = [g for g in cand if lo <= g.mid <= hi]
        if not cand:
            raise GaplessBand("no gap found in the requested window", within=within)
        return max(cand, key=lambda g: g.width)
    if rule == "rank":
        for g in cand:
            if g.index_below == rank:
                return g
        raise GaplessBand(f"no gap with exactly {rank} states below", rank=rank)
    if rule == "energy":
        for g in cand:
            if g.lo < energy < g.hi:
                return g
        raise GaplessBand(f"no gap contains energy {energy}", energy=energy)
    raise ValueError(f"unknown selection rule {rule!r}")


def eigensystem(op: KernelOperator) -> tuple[np.ndarray, np.ndarray]:
    op.require_hermitian()
    return np.linalg.eigh(op.matrix)


@dataclass(frozen=True)
class SpectralProjection:
    matrix: np.ndarray
    basis: object
    delta: tuple[float, float]
    margin: float
    rank: int
    vectors: np.ndarray | None
    method: str
    degree: int | None = None
    idempotency_defect: float = 0.0

    @property
    def n(self) -> int:
        return self.matrix.shape[0]


def spectral_projection(op: KernelOperator, delta, method: str = "eigensum",
                        min_margin: float = 1e-9, gap_margin: float | None = None,
                        degree: int | None = None) -> SpectralProjection:
    """Projection onto the spectral window ``delta`` of a self-adjoint kernel.

    Parameters
    ----------
    op : KernelOperator
    delta : (lo, hi)
        Open energy window; endpoints must avoid the spectrum.
    method : "eigensum" or "filter"
    min_margin : float
        Relative floor on the endpoint-to-spectrum distance (eigensum route).
    gap_margin : float
        Filter route only: a priori lower bound on the distance from each
        endpoint of delta to the spectrum.
    degree : int, optional
        Filter route only: polynomial degree; defaults to
        ceil(14 ||H|| / gap_margin).

    Raises
    ------
    EndpointInSpectrum
        If an endpoint sits closer to an eigenvalue than the floor allows.
    """
    lo, hi = float(delta[0]), float(delta[1])
    if not lo < hi:
        raise ValueError(f"empty window {delta}")
    if method == "eigensum":
        evals, vecs = eigensystem(op)
        scale = max(1.0, float(np.max(np.abs(evals))))
        margin = float(min(np.min(np.abs(evals - lo)), np.min(np.abs(evals - hi))))
        if margin < min_margin * scale:
            raise EndpointInSpectrum(
                f"window endpoint within {margin:.3e} of the spectrum",
                margin=margin, floor=min_margin * scale, delta=(lo, hi))
        inside = (evals > lo) & (evals < hi)
        v = vecs[:, inside]
        p = v @ v.conj().T
        p = (p + p.conj().T) / 2
        return SpectralProjection(matrix=p, basis=op.basis, delta=(lo, hi),
                                  margin=margin, rank=int(inside.sum()), vectors=v,
                                  method="eigensum")
    if method == "filter":
        op.require_hermitian()
        if gap_margin is None or gap_margin <= 0:
            raise ValueError("the filter route needs a positive a priori gap_margin")
        nrm = operator_norm(op.matrix)
        if degree is None:
            degree = int(np.ceil(14.0 * nrm / gap_margin))
        emin, emax = _spectrum_bounds(op.matrix, nrm)
        coeffs, cen, half = _step_filter(degree, (emin, emax), (lo, hi), gap_margin)
        p = _clenshaw(coeffs, op.matrix, cen, half)
        p = (p + p.conj().T) / 2
        defect = float(np.max(np.abs(p @ p - p)))
        rank = int(np.rint(np.real(np.trace(p))))
        return SpectralProjection(matrix=p, basis=op.basis, delta=(lo, hi),
                                  margin=float(gap_margin), rank=rank, vectors=None,
                                  method="filter", degree=int(degree),
                                  idempotency_defect=defect)
    raise ValueError(f"unknown method {method!r}")


def projection_below(op: KernelOperator, gap: Gap, **kw) -> SpectralProjection:
    """Eigensum projection onto everything below a detected gap."""
    evals = np.linalg.eigvalsh(op.matrix)
    lo = float(evals[0]) - max(1.0, 0.1 * abs(float(evals[0])))
    return spectral_projection(op, (lo, gap.mid), method="eigensum", **kw)


# ---------------------------------------------------------------------------
# filter internals


def _spectrum_bounds(mat: np.ndarray, nrm: float) -> tuple[float, float]:
    """Guaranteed enclosure of the spectrum: Gershgorin discs cut to +-||H||."""
    diag = np.real(np.diag(mat))
    radii = np.sum(np.abs(mat), axis=1) - np.abs(np.diag(mat))
    lo = float(max(np.min(diag - radii), -nrm))
    hi = float(min(np.max(diag + radii), nrm))
    pad = 1e-9 * max(1.0, nrm)
    return lo - pad, hi + pad


def _step_filter(degree: int, bounds, delta, margin: float,
                 n_lawson: int = 60, oversample: int = 6):
    """Chebyshev coefficients of a near-minimax 0/1 step on the scaled spectrum.

    Targets 1 on [delta_lo + margin, delta_hi - margin] and 0 on the rest of
    the enclosure, leaving +-margin transition zones around the endpoints.
    Lawson iteration reweights a least-squares fit toward the minimax optimum.
    """
    emin, emax = bounds
    cen = 0.5 * (emin + emax)
    half = 0.5 * (emax - emin)
    s = lambda e: (e - cen) / half
    lo, hi = delta
    raw = [((s(emin), s(lo - margin)), 0.0),
           ((s(lo + margin), s(hi - margin)), 1.0),
           ((s(hi + margin), s(emax)), 0.0)]
    segments, targets = [], []
    for (a, b), t in raw:
        a, b = max(a, -1.0), min(b, 1.0)
        if b > a:
            segments.append((a, b))
            targets.append(t)
    if not any(t == 1.0 for t in targets):
        raise ValueError("window minus margins is empty; margin too large for delta")
    xs, ys = [], []
    total = sum(b - a for a, b in segments)
    for (a, b), tval in zip(segments, targets):
        m = max(80, int(oversample * degree * (b - a) / total))
        t = np.cos(np.pi * (np.arange(m) + 0.5) / m)
        xs.append(0.5 * (a + b) + 0.5 * (b - a) * t)
        ys.append(np.full(m, tval))
    x = np.concatenate(xs)
    y = np.concatenate(ys)
    V = np.polynomial.chebyshev.chebvander(x, degree)
    w = np.ones(len(x)) / len(x)
    coeffs = None
    for _ in range(n_lawson):
        sw = np.sqrt(w)
        coeffs, *_ = np.linalg.lstsq(V * sw[:, None], y * sw, rcond=None)
        err = np.abs(V @ coeffs - y)
        w = w * (err + 1e-30)
        w /= w.sum()
    return coeffs, cen, half


def _clenshaw(coeffs: np.ndarray, mat: np.ndarray, cen: float, half: float) -> np.ndarray:
    n = mat.shape[0]
    eye = np.eye(n)
    ms = (mat - cen * eye) / half
    b1 = np.zeros_like(ms)
    b2 = np.zeros_like(ms)
    for k in range(len(coeffs) - 1, 0, -1):
        b1, b2 = coeffs[k] * eye + 2 * ms @ b1 - b2, b1
    return coeffs[0] * eye + ms @ b1 - b2
