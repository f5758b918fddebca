"""Reference models and the localization-dichotomy experiment.

Two tight-binding families drive every experiment:

* ``hofstadter_model``: square lattice at rational flux 2 pi p/q, whose lowest
  band carries a nonzero Chern number, and
* ``checkerboard_model``: zero flux with staggered onsite energy, a gapped
  band with Chern number zero.

The dichotomy experiment builds, for each window size, an orthonormal-type
family (one or more seeds per magnetic unit cell, symmetrically
orthonormalized) and a Parseval family (all projected point masses,
S^{-1/2}-normalized) inside the same gapped range, and reports how their
conditioning and localization moments move with the window.  A Chern-carrying
band must blow up on the orthonormal side and stay tame on the Parseval side;
a trivial band stays tame on both.
"""
from __future__ import annotations

import numpy as np

from .bases import SiteBasis
from .chern import bulk_gap_interval, chern_number
from .errors import GramSingular, PitchTooCoarse
from .frames import (delta_seed, loewdin_orthonormalize, moment_report,
                     parseval_normalize, parseval_residuals, project_family,
                     translate_family)
from .magnetics import MagneticCocycle
from .operators import (CompactPotential, KernelOperator, assemble_continuum,
                        assemble_tightbinding, constant_hopping)
from .pointsets import DeloneSet, square_lattice
from .spectral import detect_gaps, projection_below, select_gap

_NN_CUTOFF = 1.2  # nearest neighbours only on a unit square lattice


def hofstadter_model(L: int, p: int = 1, q: int = 3, t: float = -1.0):
    """Square-lattice tight-binding kernel at flux 2 pi p/q per plaquette."""
    dset = square_lattice(np.array([[0.0, L - 1.0], [0.0, L - 1.0]]), pitch=1.0)
    cocycle = MagneticCocycle.uniform_field(2 * np.pi * p / q)
    op = assemble_tightbinding(dset, cocycle, constant_hopping(t, _NN_CUTOFF))
    return dset, cocycle, op


def checkerboard_model(L: int, stagger: float = 1.0, t: float = -1.0):
    """Zero-flux square lattice with +-stagger onsite energy on the two
    sublattices; bulk gap exactly (-|stagger|, +|stagger|)."""
    dset = square_lattice(np.array([[0.0, L - 1.0], [0.0, L - 1.0]]), pitch=1.0)
    cocycle = MagneticCocycle.zero(2)

    def onsite(x):
        parity = np.rint(x[:, 0] + x[:, 1]).astype(int) % 2
        return np.where(parity == 0, stagger, -stagger)

    op = assemble_tightbinding(dset, cocycle, constant_hopping(t, _NN_CUTOFF), onsite=onsite)
    return dset, cocycle, op


def build_model(kind: str, L: int, p: int = 1, q: int = 3, t: float = -1.0,
                stagger: float = 1.0):
    if kind == "hofstadter":
        return hofstadter_model(L, p, q, t)
    if kind == "checkerboard":
        return checkerboard_model(L, stagger, t)
    raise ValueError(f"unknown model kind {kind!r}")


def reference_gap_window(kind: str, p: int = 1, q: int = 3, t: float = -1.0,
                         stagger: float = 1.0) -> tuple[float, float]:
    """Interval strictly inside the bulk gap, from the periodic model.

    The open-boundary spectrum fills bulk gaps with boundary modes, so gap
    detection needs to know where to look.
    """
    if kind == "hofstadter":
        return bulk_gap_interval(p, q, bands_below=1, t=t)
    if kind == "checkerboard":
        d = abs(stagger)
        return -0.99 * d, 0.99 * d
    raise ValueError(f"unknown model kind {kind!r}")


def magnetic_cell_centers(dset: DeloneSet, q: int) -> np.ndarray:
    """Indices of one representative site per magnetic unit cell (q x 1)."""
    x = dset.points
    col = np.rint(x[:, 0] - x[:, 0].min()).astype(int)
    return np.nonzero(col % q == q // 2)[0]


def sublattice_centers(dset: DeloneSet, parity: int = 1) -> np.ndarray:
    """Indices of the (x + y) even or odd sublattice."""
    x = dset.points
    s = np.rint(x[:, 0] + x[:, 1]).astype(int)
    return np.nonzero(s % 2 == parity)[0]


def _neighbor_index(basis: SiteBasis, idx: int, step) -> int | None:
    lut = basis.index_map()
    target = basis.positions()[idx] + np.asarray(step, dtype=float)
    return lut.get(tuple(np.round(target, 6)))


def gapped_projection(op: KernelOperator, window: tuple[float, float],
                      min_gap: float = 0.02):
    """Widest detected gap inside the reference window, and the projection
    onto everything below it."""
    evals = np.linalg.eigvalsh(op.matrix)
    gaps = detect_gaps(evals, min_gap)
    gap = select_gap(gaps, "widest", within=window)
    proj = projection_below(op, gap)
    return gap, proj


def _seed_family(op: KernelOperator, proj, center_idx: np.ndarray, m: int):
    """Columns P delta_s for m seeds per cell: the center site and, for m = 2,
    its +x neighbour (further seeds continue along +x).  Returns the columns
    and the seed positions they are anchored at."""
    basis = op.basis
    cols, centers = [], []
    for k in range(m):
        for idx in center_idx:
            j = idx if k == 0 else _neighbor_index(basis, idx, (float(k), 0.0))
            if j is None:
                continue
            cols.append(proj.matrix[:, j])
            centers.append(basis.positions()[j])
    return np.column_stack(cols), np.array(centers)


def dichotomy_experiment(kind: str = "hofstadter", sizes=(12, 24), p: int = 1,
                         q: int = 3, t: float = -1.0, stagger: float = 1.0,
                         interior_margin: float = 5.0) -> dict:
    """Window-size scaling of orthonormal-type vs Parseval families.

    For every window size: select the widest bulk gap, project below it, and

    * orthonormalize one family with m seeds per magnetic cell, where m is the
      smallest integer with m * n_cells >= rank (Gram conditioning is the
      obstruction detector; a singular Gram is recorded, not raised), and
    * S^{-1/2}-normalize the family of all projected point masses and read off
      interior localization moments (the Parseval side must stay tame).
    """
    window = reference_gap_window(kind, p=p, q=q, t=t, stagger=stagger)
    results = {"kind": kind, "gap_window": list(window), "sizes": list(sizes),
               "per_size": {}}
    for L in sizes:
        dset, cocycle, op = build_model(kind, L, p=p, q=q, t=t, stagger=stagger)
        gap, proj = gapped_projection(op, window)
        rank = proj.rank
        if kind == "hofstadter":
            centers_idx = magnetic_cell_centers(dset, q)
        else:
            centers_idx = sublattice_centers(dset, parity=1)
        n_cells = len(centers_idx)
        m = max(1, int(np.rint(rank / n_cells)))
        while m * n_cells < rank:
            m += 1
        family, seed_centers = _seed_family(op, proj, centers_idx, m)
        basis = op.basis
        try:
            ortho, kappa = loewdin_orthonormalize(family)
            ortho_moments = moment_report(ortho, seed_centers, basis.positions(),
                                          dset.window, interior_margin)
            loewdin = {"kappa": kappa, "singular": False,
                       "max_moment": ortho_moments["max_moment"]}
        except GramSingular as exc:
            loewdin = {"kappa": None, "singular": True, "max_moment": None,
                       "min_eig": exc.context["min_eig"], "max_eig": exc.context["max_eig"]}
        ch = chern_number(proj)
        seed = delta_seed(basis, 0)
        all_family = translate_family(seed, basis.positions(), cocycle)
        projected = project_family(all_family, proj)
        normalized = parseval_normalize(projected, proj)
        moments = moment_report(normalized.vectors, normalized.centers,
                                basis.positions(), dset.window, interior_margin)
        results["per_size"][str(L)] = {
            "n_sites": dset.n, "rank": rank, "n_cells": int(n_cells), "seeds_per_cell": m,
            "family_size": int(family.shape[1]),
            "gap": gap.as_dict(), "chern": ch.value, "chern_spread": ch.spread,
            "loewdin": loewdin, "parseval_moments": moments,
        }
    sizes_s = [str(L) for L in sizes]
    first, last = results["per_size"][sizes_s[0]], results["per_size"][sizes_s[-1]]
    k0, k1 = first["loewdin"]["kappa"], last["loewdin"]["kappa"]
    results["summary"] = {
        "kappa_ratio": (k1 / k0) if (k0 and k1) else None,
        "singular_sizes": [L for L in sizes_s if results["per_size"][L]["loewdin"]["singular"]],
        "moment_growth": (last["parseval_moments"]["max_moment"] /
                          first["parseval_moments"]["max_moment"] - 1.0),
    }
    return results


def frame_suite(kind: str = "hofstadter", L: int = 24, p: int = 1, q: int = 3,
                t: float = -1.0, stagger: float = 1.0, n_probes: int = 100,
                interior_margin: float = 5.0, seed: int = 0) -> dict:
    """Parseval construction on a rank-matched gap, with residual probes.

    The gap is selected by rank (one state per magnetic cell below it), the
    family is one projected point mass per cell, and after S^{-1/2}
    normalization the family must resolve the projection: residuals on random
    range vectors, tightness of the frame operator, and dual-frame
    reconstruction are all reported.
    """
    dset, cocycle, op = build_model(kind, L, p=p, q=q, t=t, stagger=stagger)
    evals = np.linalg.eigvalsh(op.matrix)
    if kind == "hofstadter":
        centers_idx = magnetic_cell_centers(dset, q)
    else:
        centers_idx = sublattice_centers(dset, parity=1)
    rank = len(centers_idx)
    gaps = detect_gaps(evals, 1e-4)
    gap = select_gap(gaps, "rank", rank=rank)
    proj = projection_below(op, gap)
    basis = op.basis
    family = translate_family(delta_seed(basis, 0), basis.positions()[centers_idx], cocycle)
    projected = project_family(family, proj)
    normalized = parseval_normalize(projected, proj)
    rng = np.random.default_rng(seed)
    raw = rng.normal(size=(basis.n, n_probes)) + 1j * rng.normal(size=(basis.n, n_probes))
    probes = proj.matrix @ raw
    residuals = parseval_residuals(normalized, proj, probes)
    s = normalized.vectors @ normalized.vectors.conj().T
    parseval_defect = float(np.max(np.abs(s - proj.matrix)))
    coef = normalized.vectors.conj().T @ probes
    recon = normalized.vectors @ coef
    recon_err = float(np.max(np.linalg.norm(recon - probes, axis=0) /
                             np.linalg.norm(probes, axis=0)))
    moments = moment_report(normalized.vectors, normalized.centers, basis.positions(),
                            dset.window, interior_margin)
    return {
        "kind": kind, "L": L, "rank": rank, "family_size": normalized.size,
        "gap": gap.as_dict(),
        "parseval_defect": parseval_defect,
        "max_probe_residual": float(residuals.max()),
        "reconstruction_error": recon_err,
        "moments": moments,
    }


# ---------------------------------------------------------------------------
# continuum helpers


def bump_wells(centers, amplitude: float, radius: float) -> CompactPotential:
    """Smooth compactly supported wells: amp * exp(1 - 1/(1 - (r/rad)^2))."""
    centers = np.atleast_2d(np.asarray(centers, dtype=float))

    def fn(x):
        out = np.zeros(len(x))
        for c in centers:
            r2 = np.sum((x - c) ** 2, axis=1) / (radius * radius)
            inside = r2 < 1.0
            out[inside] += amplitude * np.exp(1.0 - 1.0 / (1.0 - r2[inside]))
        return out

    return CompactPotential(fn, radius)


def landau_model(window, pitch: float, field: float) -> KernelOperator:
    """Free continuum kernel at uniform field; low spectrum near (2n+1) field."""
    return assemble_continuum(window, pitch, MagneticCocycle.uniform_field(field))


def delone_continuum_model(window, pitch: float, dset: DeloneSet,
                           cocycle: MagneticCocycle, well_amplitude: float,
                           well_radius: float) -> KernelOperator:
    """Continuum kernel with one identical compact well on every set point.

    Raises
    ------
    PitchTooCoarse
        If the grid cannot resolve the pattern (needs pitch <= r/4).
    """
    if pitch > dset.r / 4 + 1e-12:
        raise PitchTooCoarse(f"pitch {pitch} exceeds a quarter of the hard-core radius {dset.r}",
                             pitch=float(pitch), r=float(dset.r))
    wells = bump_wells(dset.points, well_amplitude, well_radius)
    return assemble_continuum(window, pitch, cocycle, wells)
