"""Frames of magnetic translates inside a gapped spectral range.

A family is built by magnetically translating one seed to a set of centers,
then projecting into the range of a spectral projection.  The frame operator
S = sum_k |g_k><g_k| restricted to the range decides everything: its spectral
bounds are the frame bounds, S^{-1/2} turns the family into a Parseval frame,
S^{-1} gives the canonical dual, and a singular Gram matrix is the signature
that the family cannot span the range (which is exactly what the topological
obstruction produces for orthonormal-type families).
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .bases import GridBasis
from .errors import GramSingular, WidthTooLarge
from .magnetics import MagneticCocycle, translate

_SINGULAR_EPS = 1e-10


@dataclass(frozen=True)
class FrameSeed:
    """One vector with a declared support radius around its center."""
    vector: np.ndarray
    center: np.ndarray
    support_radius: float
    basis: object


def gaussian_seed(basis: GridBasis, center, width: float,
                  support_radius: float | None = None) -> FrameSeed:
    """Normalized Gaussian bump truncated at its support radius (default 4w)."""
    center = np.asarray(center, dtype=float)
    rad = 4.0 * width if support_radius is None else float(support_radius)
    x = basis.positions()
    r2 = np.sum((x - center) ** 2, axis=1)
    v = np.where(r2 <= rad * rad, np.exp(-r2 / (2 * width * width)), 0.0).astype(complex)
    nrm = np.linalg.norm(v)
    if nrm == 0:
        raise ValueError("seed support contains no grid point")
    return FrameSeed(vector=v / nrm, center=center, support_radius=rad, basis=basis)


def bump_seed(dset, center, width: float, basis: GridBasis) -> FrameSeed:
    """Smooth compactly supported seed exp(-1/(1 - (|x-c|/width)^2)) on the grid.

    The profile is even, C-infinity, and vanishes identically outside the open
    ball of radius ``width``.  The width may not exceed half the hard-core
    radius of the point set: that bound is what makes translates to distinct
    set points exactly orthogonal.

    Raises
    ------
    WidthTooLarge
        If width > r/2.
    """
    if width > dset.r / 2 + 1e-12:
        raise WidthTooLarge(f"seed width {width} exceeds half the hard-core radius {dset.r / 2}",
                            width=float(width), r=float(dset.r))
    if width <= 0:
        raise ValueError("seed width must be positive")
    center = np.asarray(center, dtype=float)
    x = basis.positions()
    u2 = np.sum((x - center) ** 2, axis=1) / (width * width)
    v = np.zeros(basis.n)
    inside = u2 < 1.0
    v[inside] = np.exp(1.0 - 1.0 / (1.0 - u2[inside]))
    nrm = np.linalg.norm(v)
    if nrm == 0:
        raise ValueError("seed support contains no grid point")
    return FrameSeed(vector=(v / nrm).astype(complex), center=center,
                     support_radius=float(width), basis=basis)


def delta_seed(basis, site_index: int) -> FrameSeed:
    """Point mass on one site; support radius zero."""
    v = np.zeros(basis.n, dtype=complex)
    v[site_index] = 1.0
    return FrameSeed(vector=v, center=np.array(basis.positions()[site_index], dtype=float),
                     support_radius=0.0, basis=basis)


@dataclass(frozen=True)
class TranslateFrame:
    """Columns of ``vectors`` are the family members, one per kept center."""
    vectors: np.ndarray
    centers: np.ndarray
    basis: object
    support_radius: float = 0.0

    @property
    def size(self) -> int:
        return self.vectors.shape[1]


def translate_family(seed: FrameSeed, centers, cocycle: MagneticCocycle,
                     window=None) -> TranslateFrame:
    """Magnetic translates of the seed to every admissible center.

    Centers whose support ball pokes out of the window are dropped (the
    translate would be clipped and the family would lose covariance); a seed
    of zero support keeps every center.  ``window`` defaults to the basis
    window for grids and is required for positive-support seeds on site bases.
    """
    centers = np.asarray(centers, dtype=float)
    basis = seed.basis
    if window is None:
        window = getattr(basis, "window", None)
    if seed.support_radius > 0:
        if window is None:
            raise ValueError("a window is needed to erode centers for a spread-out seed")
        win = np.asarray(window, dtype=float)
        keep = np.all((centers - seed.support_radius >= win[:, 0]) &
                      (centers + seed.support_radius <= win[:, 1]), axis=1)
        centers = centers[keep]
    if len(centers) == 0:
        raise ValueError("no admissible center survived the erosion")
    cols = np.empty((basis.n, len(centers)), dtype=complex)
    for k, c in enumerate(centers):
        cols[:, k] = translate(cocycle, c - seed.center, seed.vector, basis)
    return TranslateFrame(vectors=cols, centers=centers, basis=basis,
                          support_radius=seed.support_radius)


def project_family(frame: TranslateFrame, proj) -> TranslateFrame:
    """Push every member into the range of the projection."""
    return TranslateFrame(vectors=proj.matrix @ frame.vectors, centers=frame.centers,
                          basis=frame.basis, support_radius=frame.support_radius)


# ---------------------------------------------------------------------------
# frame operator machinery; ``proj`` below must carry an explicit orthonormal
# range basis (eigensum projections do)


def _range_matrix(frame: TranslateFrame, proj) -> np.ndarray:
    if proj.vectors is None:
        raise ValueError("frame analysis needs a projection with an explicit range basis")
    return proj.vectors.conj().T @ frame.vectors  # (rank, m)


def frame_bounds(frame: TranslateFrame, proj) -> tuple[float, float]:
    """Least and greatest eigenvalue of the frame operator on the range."""
    a = _range_matrix(frame, proj)
    w = np.linalg.eigvalsh(a @ a.conj().T)
    return float(w[0]), float(w[-1])


def frame_operator(frame: TranslateFrame) -> np.ndarray:
    return frame.vectors @ frame.vectors.conj().T


def parseval_normalize(frame: TranslateFrame, proj,
                       eps: float = _SINGULAR_EPS) -> TranslateFrame:
    """S^{-1/2}-normalize the family so it resolves the projection exactly.

    Raises
    ------
    GramSingular
        If the frame operator on the range is singular to working precision
        (the family does not span the range).
    """
    a = _range_matrix(frame, proj)
    s_r = a @ a.conj().T
    w, u = np.linalg.eigh(s_r)
    if w[0] <= eps * max(w[-1], 0.0) or w[-1] <= 0.0:
        raise GramSingular(
            f"frame operator on the range is singular (min {w[0]:.3e}, max {w[-1]:.3e})",
            min_eig=float(w[0]), max_eig=float(w[-1]), family=frame.size,
            rank=proj.rank)
    inv_sqrt = (u / np.sqrt(w)) @ u.conj().T
    vectors = proj.vectors @ (inv_sqrt @ a)
    return TranslateFrame(vectors=vectors, centers=frame.centers, basis=frame.basis,
                          support_radius=frame.support_radius)


def dual_family(frame: TranslateFrame, proj, eps: float = _SINGULAR_EPS) -> TranslateFrame:
    """Canonical dual frame S^{-1} g_k inside the range."""
    a = _range_matrix(frame, proj)
    s_r = a @ a.conj().T
    w, u = np.linalg.eigh(s_r)
    if w[0] <= eps * max(w[-1], 0.0) or w[-1] <= 0.0:
        raise GramSingular(f"frame operator on the range is singular (min {w[0]:.3e})",
                           min_eig=float(w[0]), max_eig=float(w[-1]))
    inv = (u / w) @ u.conj().T
    return TranslateFrame(vectors=proj.vectors @ (inv @ a), centers=frame.centers,
                          basis=frame.basis, support_radius=frame.support_radius)


def analysis(frame: TranslateFrame, vec: np.ndarray) -> np.ndarray:
    return frame.vectors.conj().T @ vec


def synthesis(frame: TranslateFrame, coef: np.ndarray) -> np.ndarray:
    return frame.vectors @ coef


def parseval_residuals(frame: TranslateFrame, proj, probes: np.ndarray) -> np.ndarray:
    """||(S - P) psi|| / ||psi|| for each probe column psi."""
    probes = np.atleast_2d(probes.T).T
    s_psi = frame.vectors @ (frame.vectors.conj().T @ probes)
    p_psi = proj.matrix @ probes
    num = np.linalg.norm(s_psi - p_psi, axis=0)
    den = np.linalg.norm(probes, axis=0)
    return num / den


def gram_matrix(vectors: np.ndarray) -> np.ndarray:
    return vectors.conj().T @ vectors


def loewdin_orthonormalize(vectors: np.ndarray, eps: float = _SINGULAR_EPS):
    """Symmetric orthonormalization W = V G^{-1/2}.

    Returns (W, condition_number) where the condition number is the eigenvalue
    ratio of the Gram matrix; raises GramSingular when the family is linearly
    dependent to working precision, which is the expected failure mode when
    the family size exceeds the spectral rank it must fit inside.
    """
    g = gram_matrix(vectors)
    w, u = np.linalg.eigh(g)
    if w[0] <= eps * max(w[-1], 0.0) or w[-1] <= 0.0:
        raise GramSingular(f"Gram matrix singular (min {w[0]:.3e}, max {w[-1]:.3e})",
                           min_eig=float(w[0]), max_eig=float(w[-1]),
                           family=vectors.shape[1])
    ortho = vectors @ ((u / np.sqrt(w)) @ u.conj().T)
    return ortho, float(w[-1] / w[0])


# ---------------------------------------------------------------------------
# localization diagnostics


def localization_moment(vec: np.ndarray, positions: np.ndarray, center) -> float:
    """Second-moment weight sum((1 + |x - c|^2) |v(x)|^2); small means the
    vector holds its mass near its nominal center."""
    center = np.asarray(center, dtype=float)
    w = 1.0 + np.sum((positions - center) ** 2, axis=1)
    return float(np.sum(w * np.abs(vec) ** 2))


def moment_report(vectors: np.ndarray, centers: np.ndarray, positions: np.ndarray,
                  window, interior_margin: float = 5.0) -> dict:
    """Worst localization moment over members centered deep in the window.

    Members near the boundary see the window edge, not the bulk pattern, so
    growth statistics are read off the interior ones only.
    """
    win = np.asarray(window, dtype=float)
    interior = np.all((centers >= win[:, 0] + interior_margin) &
                      (centers <= win[:, 1] - interior_margin), axis=1)
    if not interior.any():
        raise ValueError(f"no member center is {interior_margin} units inside the window")
    moments = [localization_moment(vectors[:, k], positions, centers[k])
               for k in np.nonzero(interior)[0]]
    return {"max_moment": float(np.max(moments)), "mean_moment": float(np.mean(moments)),
            "n_interior": int(interior.sum()), "n_total": int(len(centers))}


def decay_exponent(vec: np.ndarray, positions: np.ndarray, center,
                   bin_width: float, discard_outer: float = 0.1) -> dict:
    """Polynomial-decay exponent of a vector envelope around its center.

    The radial envelope is the max of |v| per radial bin; a least-squares line
    through log(envelope) vs log(radius) over the kept bins gives the exponent
    (positive means decay like r^-exponent).  The outermost fraction of radii
    is discarded because the window edge truncates tails there.
    """
    center = np.asarray(center, dtype=float)
    r = np.linalg.norm(positions - center, axis=1)
    keep = r <= (1.0 - discard_outer) * r.max()
    r, mag = r[keep], np.abs(np.asarray(vec))[keep]
    bins = (r / bin_width).astype(int)
    n_bins = bins.max() + 1
    env = np.zeros(n_bins)
    np.maximum.at(env, bins, mag)
    mids = (np.arange(n_bins) + 0.5) * bin_width
    good = (env > 0) & (mids > bin_width)  # innermost bin has no meaningful radius
    if good.sum() < 3:
        return {"exponent": float("nan"), "fit_residual": float("nan"),
                "n_bins": int(good.sum())}
    lx, ly = np.log(mids[good]), np.log(env[good])
    coef = np.polyfit(lx, ly, 1)
    res = float(np.sqrt(np.mean((np.polyval(coef, lx) - ly) ** 2)))
    return {"exponent": float(-coef[0]), "fit_residual": res, "n_bins": int(good.sum())}


def localization_report(vectors: np.ndarray, centers: np.ndarray, positions: np.ndarray,
                        window, bin_width: float, interior_margin: float = 5.0) -> dict:
    """Moment statistics plus decay exponents for the interior family members."""
    report = moment_report(vectors, centers, positions, window, interior_margin)
    win = np.asarray(window, dtype=float)
    interior = np.all((centers >= win[:, 0] + interior_margin) &
                      (centers <= win[:, 1] - interior_margin), axis=1)
    fits = [decay_exponent(vectors[:, k], positions, centers[k], bin_width)
            for k in np.nonzero(interior)[0]]
    exps = [f["exponent"] for f in fits if np.isfinite(f["exponent"])]
    report["decay"] = {
        "min_exponent": float(np.min(exps)) if exps else float("nan"),
        "mean_exponent": float(np.mean(exps)) if exps else float("nan"),
        "max_fit_residual": float(np.max([f["fit_residual"] for f in fits]))
        if fits else float("nan"),
    }
    return report
