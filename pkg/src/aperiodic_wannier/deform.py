"""Deformation stability runs.

Three drivers, all reporting plain dicts:

* ``lattice_deformation``: linearly deform the square lattice toward a
  jittered copy, tracking the bulk gap and the Chern marker along the path.
  The gap is found once in the reference bulk window, then followed by the
  eigenvalue rank below its previous midpoint, which survives the slow drift
  of boundary modes through the gap.
* ``field_sweep``: same tracking under a small relative change of the twist.
* ``resolvent_sweep``: continuum kernel with smoothly moving wells; checks
  the second-resolvent inequality at every step and that halving the step
  roughly halves the resolvent increments (linear response regime).
"""
from __future__ import annotations

import numpy as np

from .chern import chern_number
from .errors import GaplessBand
from .magnetics import MagneticCocycle
from .models import bump_wells, reference_gap_window
from .operators import assemble_continuum, assemble_tightbinding, constant_hopping, \
    resolvent_difference_check
from .pointsets import jittered_lattice, make_path, square_lattice
from .spectral import detect_gaps, select_gap

_MIN_TRACKED_WIDTH = 1e-3
_DRIFT_TOL = 0.05


def _tracked_projection(op, window, prev_mid: float | None, min_gap: float):
    """Widest-gap selection on the first sample, rank tracking afterwards."""
    evals, vecs = np.linalg.eigh(op.matrix)
    if prev_mid is None:
        gaps = detect_gaps(evals, min_gap)
        gap = select_gap(gaps, "widest", within=window)
        rank = gap.index_below
    else:
        rank = int(np.sum(evals < prev_mid))
        if rank == 0 or rank == len(evals):
            raise GaplessBand("tracked gap ran off the spectrum", prev_mid=prev_mid)
    lo, hi = float(evals[rank - 1]), float(evals[rank])
    if hi - lo < _MIN_TRACKED_WIDTH:
        raise GaplessBand(f"tracked gap closed to width {hi - lo:.3e}",
                          lo=lo, hi=hi, rank=rank)
    v = vecs[:, :rank]
    proj = v @ v.conj().T
    return {"lo": lo, "hi": hi, "width": hi - lo, "mid": 0.5 * (lo + hi), "rank": rank}, proj


def lattice_deformation(L: int = 24, p: int = 1, q: int = 3, t: float = -1.0,
                        n_samples: int = 11, displacement: float = 0.05,
                        seed: int = 0, fractions=(0.4, 0.5)) -> dict:
    """Jitter the lattice by up to ``displacement`` along a linear path."""
    window = np.array([[0.0, L - 1.0], [0.0, L - 1.0]])
    base = square_lattice(window, pitch=1.0)
    end = jittered_lattice(window, pitch=1.0, displacement=displacement, seed=seed)
    path = make_path(base, end, n_samples)
    cocycle = MagneticCocycle.uniform_field(2 * np.pi * p / q)
    hopping = constant_hopping(t, 1.2)
    ref_window = reference_gap_window("hofstadter", p=p, q=q, t=t)
    rows = []
    prev_mid = None
    for time, sample in zip(path.times, path.samples):
        op = assemble_tightbinding(sample, cocycle, hopping)
        try:
            gap, proj = _tracked_projection(op, ref_window, prev_mid, min_gap=0.02)
        except GaplessBand as exc:
            raise GaplessBand(f"gap closed at t={float(time):.4g}", t_star=float(time),
                              rows=rows, **exc.context) from exc
        prev_mid = gap["mid"]
        ch = chern_number(proj, sample.points, fractions=fractions)
        rows.append({"t": float(time), "gap": gap, "chern": ch.value,
                     "chern_imag": ch.max_imag})
    cherns = [r["chern"] for r in rows]
    drift = float(max(cherns) - min(cherns))
    return {
        "kind": "lattice_deformation", "L": L, "p": p, "q": q,
        "displacement": displacement, "n_samples": n_samples, "seed": seed,
        "max_displacement": path.max_displacement,
        "rows": rows,
        "summary": {"chern_drift": drift,
                    "min_gap_width": float(min(r["gap"]["width"] for r in rows)),
                    "gap_open": True,
                    "verdict": "constant" if drift < _DRIFT_TOL else "drift"},
    }


def field_sweep(L: int = 24, p: int = 1, q: int = 3, t: float = -1.0,
                n_samples: int = 11, rel_span: float = 0.03,
                fractions=(0.4, 0.5)) -> dict:
    """Scale the twist by (1 + rel_span * s), s in [0, 1], on the rigid lattice."""
    window = np.array([[0.0, L - 1.0], [0.0, L - 1.0]])
    base = square_lattice(window, pitch=1.0)
    hopping = constant_hopping(t, 1.2)
    ref_window = reference_gap_window("hofstadter", p=p, q=q, t=t)
    field0 = 2 * np.pi * p / q
    rows = []
    prev_mid = None
    for s in np.linspace(0.0, 1.0, n_samples):
        cocycle = MagneticCocycle.uniform_field(field0 * (1 + rel_span * s))
        op = assemble_tightbinding(base, cocycle, hopping)
        try:
            gap, proj = _tracked_projection(op, ref_window, prev_mid, min_gap=0.02)
        except GaplessBand as exc:
            raise GaplessBand(f"gap closed at s={float(s):.4g}", t_star=float(s),
                              rows=rows, **exc.context) from exc
        prev_mid = gap["mid"]
        ch = chern_number(proj, base.points, fractions=fractions)
        rows.append({"s": float(s), "field": field0 * (1 + rel_span * s),
                     "gap": gap, "chern": ch.value, "chern_imag": ch.max_imag})
    cherns = [r["chern"] for r in rows]
    drift = float(max(cherns) - min(cherns))
    return {
        "kind": "field_sweep", "L": L, "p": p, "q": q, "rel_span": rel_span,
        "n_samples": n_samples,
        "rows": rows,
        "summary": {"chern_drift": drift,
                    "min_gap_width": float(min(r["gap"]["width"] for r in rows)),
                    "gap_open": True,
                    "verdict": "constant" if drift < _DRIFT_TOL else "drift"},
    }


# ---------------------------------------------------------------------------
# continuum resolvent sweep

_WELL_TRACKS = (
    ((1.5, 1.8), (1.2, 0.6)),
    ((4.5, 2.2), (-1.0, 0.9)),
    ((3.0, 4.2), (0.3, -1.1)),
)


def _well_centers(s: float) -> np.ndarray:
    return np.array([[x0 + vx * s, y0 + vy * s] for (x0, y0), (vx, vy) in _WELL_TRACKS])


def _sweep_operators(times, window, pitch, theta, amplitude, radius):
    cocycle = MagneticCocycle(np.array([[0.0, theta], [-theta, 0.0]]))
    return [assemble_continuum(window, pitch, cocycle,
                               bump_wells(_well_centers(s), amplitude, radius))
            for s in times]


def resolvent_sweep(pitch: float = 0.25, theta: float = 0.2, z: complex = 0.5 + 0.5j,
                    n_samples: int = 6, amplitude: float = -5.0,
                    radius: float = 0.6) -> dict:
    """Moving-well continuum sweep with the second-resolvent bound per step.

    Runs the path twice, at ``n_samples`` and at the half step, and compares
    median per-step resolvent increments; in the linear-response regime the
    fine median is close to half the coarse one.
    """
    window = np.array([[0.0, 6.0], [0.0, 6.0]])

    def steps(times):
        ops = _sweep_operators(times, window, pitch, theta, amplitude, radius)
        out = []
        for a, b in zip(ops[:-1], ops[1:]):
            chk = resolvent_difference_check(a, b, z)
            out.append(chk)
        return out

    coarse_times = np.linspace(0.0, 1.0, n_samples)
    fine_times = np.linspace(0.0, 1.0, 2 * n_samples - 1)
    coarse = steps(coarse_times)
    fine = steps(fine_times)
    med_c = float(np.median([c["lhs"] for c in coarse]))
    med_f = float(np.median([c["lhs"] for c in fine]))
    return {
        "kind": "resolvent_sweep", "pitch": pitch, "theta": theta,
        "z": [z.real, z.imag], "n_samples": n_samples,
        "bound_holds": bool(all(c["holds"] for c in coarse + fine)),
        "steps": [{"lhs": c["lhs"], "rhs": c["rhs"],
                   "perturbation_norm": c["perturbation_norm"]} for c in coarse],
        "halving_ratio": med_f / med_c,
        "summary": {"max_lhs": float(max(c["lhs"] for c in coarse)),
                    "median_coarse": med_c, "median_fine": med_f},
    }
