"""Delone point sets: generation, verification, comparison, deformation.

A point set carries its own packing radius r (every pair is at least 2r apart)
and covering radius R (every point of the window eroded by R has a set point
within R).  The packing bound is checked at construction; the covering bound
is a statement about the infinite pattern, so ``verify`` estimates it with a
probe grid and reports the discretization slack instead of pretending to an
exact answer.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import linear_sum_assignment
from scipy.spatial import cKDTree

from .bases import _as_window
from .errors import DensityViolated, EmptyIntersection, EmptyWindow, FormatError, NoBijection


@dataclass(frozen=True)
class DeloneSet:
    points: np.ndarray
    window: np.ndarray
    r: float
    R: float

    def __post_init__(self):
        pts = np.array(self.points, dtype=float)
        win = _as_window(self.window)
        if pts.ndim != 2 or len(pts) == 0:
            raise ValueError(f"points must be a nonempty (n, d) array, got shape {pts.shape}")
        if pts.shape[1] != win.shape[0]:
            raise ValueError(f"points are {pts.shape[1]}-dimensional, window is {win.shape[0]}-dimensional")
        if not (self.r > 0 and self.R >= self.r):
            raise ValueError(f"need 0 < r <= R, got r={self.r}, R={self.R}")
        if np.any(pts < win[:, 0] - 1e-9) or np.any(pts > win[:, 1] + 1e-9):
            bad = int(np.argmax(np.any((pts < win[:, 0] - 1e-9) | (pts > win[:, 1] + 1e-9), axis=1)))
            raise ValueError(f"point {pts[bad].tolist()} lies outside the window")
        if len(pts) > 1:
            d, j = cKDTree(pts).query(pts, k=2)
            worst = int(np.argmin(d[:, 1]))
            if d[worst, 1] < 2 * self.r - 1e-9:
                raise DensityViolated(
                    f"pair at distance {d[worst, 1]:.6g} violates hard-core diameter {2 * self.r:.6g}",
                    i=worst, j=int(j[worst, 1]), distance=float(d[worst, 1]), r=self.r)
        pts.setflags(write=False)
        win.setflags(write=False)
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "window", win)
        object.__setattr__(self, "r", float(self.r))
        object.__setattr__(self, "R", float(self.R))

    @property
    def n(self) -> int:
        return len(self.points)

    @property
    def dim(self) -> int:
        return self.points.shape[1]


@dataclass(frozen=True)
class DeloneReport:
    """Result of ``verify``: measured geometry against the declared (r, R)."""
    min_pair_distance: float
    covering_estimate: float
    covering_upper_bound: float
    probe_pitch: float
    n_probes: int
    packing_ok: bool
    covering_ok: bool

    def as_dict(self) -> dict:
        return {
            "min_pair_distance": self.min_pair_distance,
            "covering_estimate": self.covering_estimate,
            "covering_upper_bound": self.covering_upper_bound,
            "probe_pitch": self.probe_pitch,
            "n_probes": self.n_probes,
            "packing_ok": self.packing_ok,
            "covering_ok": self.covering_ok,
        }


def verify(dset: DeloneSet, probe_pitch: float | None = None) -> DeloneReport:
    """Check the declared Delone bounds.

    Packing is exact (nearest-neighbour query).  Covering is probed on a grid
    of the stated pitch over the window eroded by R; the upper bound adds half
    the probe-cell diameter, which is what the grid can certify.

    Parameters
    ----------
    dset : DeloneSet
    probe_pitch : float, optional
        Spacing of the covering probe grid.  Defaults to r/4.

    Raises
    ------
    EmptyWindow
        If the window eroded by R has no interior to probe.
    """
    pts = dset.points
    if len(pts) > 1:
        d, _ = cKDTree(pts).query(pts, k=2)
        min_pair = float(d[:, 1].min())
    else:
        min_pair = np.inf
    pitch = float(probe_pitch) if probe_pitch is not None else dset.r / 4
    lo = dset.window[:, 0] + dset.R
    hi = dset.window[:, 1] - dset.R
    if np.any(hi <= lo):
        raise EmptyWindow("window eroded by R has no interior; enlarge the window or shrink R",
                          window=dset.window.tolist(), R=dset.R)
    axes = [np.arange(lo[j], hi[j] + pitch * 1e-9, pitch) for j in range(dset.dim)]
    mesh = np.meshgrid(*axes, indexing="ij")
    probes = np.column_stack([m.ravel() for m in mesh])
    dist, _ = cKDTree(pts).query(probes)
    est = float(dist.max())
    slack = pitch * np.sqrt(dset.dim) / 2
    return DeloneReport(
        min_pair_distance=min_pair,
        covering_estimate=est,
        covering_upper_bound=est + slack,
        probe_pitch=pitch,
        n_probes=len(probes),
        packing_ok=bool(min_pair >= 2 * dset.r - 1e-9),
        covering_ok=bool(est < dset.R),
    )


# ---------------------------------------------------------------------------
# generators


def square_lattice(window, pitch: float = 1.0) -> DeloneSet:
    """Points of pitch * Z^d inside the window (anchored at the low corner)."""
    win = _as_window(window)
    d = win.shape[0]
    axes = [np.arange(win[j, 0], win[j, 1] + pitch * 1e-9, pitch) for j in range(d)]
    mesh = np.meshgrid(*axes, indexing="ij")
    pts = np.column_stack([m.ravel() for m in mesh])
    if len(pts) == 0:
        raise EmptyWindow("window contains no lattice point", window=win.tolist(), pitch=pitch)
    # covering radius of Z^d is sqrt(d)/2; 6% headroom keeps R strict
    return DeloneSet(pts, win, r=pitch / 2, R=0.53 * np.sqrt(d) * pitch)


def _disc_sample(rng: np.random.Generator, n: int, d: int, radius: float) -> np.ndarray:
    if d == 1:
        return rng.uniform(-radius, radius, size=(n, 1))
    u = rng.normal(size=(n, d))
    u /= np.linalg.norm(u, axis=1, keepdims=True)
    rad = radius * rng.uniform(0.0, 1.0, size=(n, 1)) ** (1.0 / d)
    return u * rad


def jittered_lattice(window, pitch: float = 1.0, displacement: float = 0.05,
                     seed: int | None = None) -> DeloneSet:
    """Square lattice with an iid displacement drawn uniformly from a disc.

    The displacement must stay below pitch/2 or the hard-core radius collapses.
    Interior points keep the window: displaced points are clipped back onto it.
    """
    if not 0 <= displacement < 0.45 * pitch:
        raise DensityViolated(f"displacement {displacement} too large for pitch {pitch}",
                              displacement=displacement, pitch=pitch)
    base = square_lattice(window, pitch)
    rng = np.random.default_rng(seed)
    pts = base.points + _disc_sample(rng, base.n, base.dim, displacement)
    pts = np.clip(pts, base.window[:, 0], base.window[:, 1])
    return DeloneSet(pts, base.window, r=pitch / 2 - displacement,
                     R=0.53 * np.sqrt(base.dim) * pitch + displacement)


def random_hardcore(window, min_dist: float, seed: int | None = None,
                    attempts_per_volume: float = 30.0) -> DeloneSet:
    """Random sequential adsorption: darts accepted if min_dist from all kept.

    Saturates to a density where the covering radius is empirically below
    about 1.6 * min_dist in 2d; R is measured on the result rather than
    assumed.
    """
    win = _as_window(window)
    d = win.shape[0]
    rng = np.random.default_rng(seed)
    vol = float(np.prod(win[:, 1] - win[:, 0]))
    n_try = max(64, int(attempts_per_volume * vol / min_dist**d))
    darts = rng.uniform(win[:, 0], win[:, 1], size=(n_try, d))
    cell = min_dist  # conflicts only reach into adjacent cells
    grid: dict[tuple, list[int]] = {}
    kept: list[int] = []
    for i, p in enumerate(darts):
        key = tuple((p // cell).astype(int))
        ok = True
        for nb in np.ndindex(*(3,) * d):
            neigh = tuple(k + o - 1 for k, o in zip(key, nb))
            for j in grid.get(neigh, ()):
                if np.sum((darts[j] - p) ** 2) < min_dist**2:
                    ok = False
                    break
            if not ok:
                break
        if ok:
            grid.setdefault(key, []).append(i)
            kept.append(i)
    pts = darts[kept]
    if len(pts) == 0:
        raise EmptyWindow("no dart survived; window too small for min_dist",
                          window=win.tolist(), min_dist=min_dist)
    trial = DeloneSet(pts, win, r=min_dist / 2, R=max(4 * min_dist, 1e-6))
    try:
        rep = verify(trial, probe_pitch=min_dist / 4)
        R = 1.1 * rep.covering_upper_bound
    except EmptyWindow:
        R = 4 * min_dist
    return DeloneSet(pts, win, r=min_dist / 2, R=max(R, min_dist / 2))


_K4 = np.arange(4)
_OCT_PHYS = np.stack([np.cos(_K4 * np.pi / 4), np.sin(_K4 * np.pi / 4)])
_OCT_INT = np.stack([np.cos(3 * _K4 * np.pi / 4), np.sin(3 * _K4 * np.pi / 4)])


def _in_octagon(u: np.ndarray, c: float) -> np.ndarray:
    a1, a2 = np.abs(u[:, 0]), np.abs(u[:, 1])
    return np.maximum(np.maximum(a1, a2), (a1 + a2) / np.sqrt(2)) <= c


def octagonal_quasilattice(window, scale: float = 1.0,
                           offset=(0.11, 0.047)) -> DeloneSet:
    """Eightfold cut-and-project set.

    Z^4 is mapped to the plane by e_k -> (cos k pi/4, sin k pi/4); a lattice
    point is kept when its image under the complementary map
    e_k -> (cos 3k pi/4, sin 3k pi/4), shifted by ``offset``, lands inside the
    regular octagon of apothem 1.  The offset is a generic shift keeping
    lattice points off the acceptance boundary; the shortest distance in the
    output is 2 sin(pi/8) * scale.
    """
    win = _as_window(window)
    if win.shape[0] != 2:
        raise ValueError("the octagonal generator is two-dimensional")
    off = np.asarray(offset, dtype=float)
    M = np.vstack([_OCT_PHYS, _OCT_INT])
    Minv = np.linalg.inv(M)
    corners = np.array([[cx, cy, ix, iy]
                        for cx in win[0] / scale for cy in win[1] / scale
                        for ix in (-1.5, 1.5) for iy in (-1.5, 1.5)])
    nbox = corners @ Minv.T
    nmin = np.floor(nbox.min(0)).astype(int) - 1
    nmax = np.ceil(nbox.max(0)).astype(int) + 1
    A = np.stack(np.meshgrid(np.arange(nmin[0], nmax[0] + 1),
                             np.arange(nmin[1], nmax[1] + 1), indexing="ij"), -1).reshape(-1, 2)
    B = np.stack(np.meshgrid(np.arange(nmin[2], nmax[2] + 1),
                             np.arange(nmin[3], nmax[3] + 1), indexing="ij"), -1).reshape(-1, 2)
    pa, pb = A @ _OCT_PHYS[:, :2].T, B @ _OCT_PHYS[:, 2:].T
    ia, ib = A @ _OCT_INT[:, :2].T, B @ _OCT_INT[:, 2:].T
    chunks = []
    for i in range(len(A)):
        x = (pa[i] + pb) * scale
        keep = np.all((x >= win[:, 0]) & (x <= win[:, 1]), axis=1)
        if not keep.any():
            continue
        u = ia[i] + ib[keep] + off
        ok = _in_octagon(u, 1.0)
        if ok.any():
            chunks.append(x[keep][ok])
    if not chunks:
        raise EmptyWindow("acceptance window caught no lattice point", window=win.tolist())
    pts = np.concatenate(chunks)
    d, _ = cKDTree(pts).query(pts, k=2)
    r = float(d[:, 1].min()) / 2
    trial = DeloneSet(pts, win, r=r, R=max(4 * scale, 8 * r))
    try:
        rep = verify(trial, probe_pitch=r / 2)
        R = 1.15 * rep.covering_upper_bound
    except EmptyWindow:
        R = 2.0 * scale
    return DeloneSet(pts, win, r=r, R=max(R, r))


_GENERATORS = {
    "square": square_lattice,
    "jittered": jittered_lattice,
    "hardcore": random_hardcore,
    "octagonal": octagonal_quasilattice,
}


def generate(kind: str, window, **params) -> DeloneSet:
    """Dispatch to a named generator; ``kind`` is one of square, jittered,
    hardcore, octagonal."""
    if kind not in _GENERATORS:
        raise ValueError(f"unknown generator {kind!r}; choose from {sorted(_GENERATORS)}")
    return _GENERATORS[kind](window, **params)


# ---------------------------------------------------------------------------
# comparison and deformation


def hausdorff_window_distance(a: DeloneSet, b: DeloneSet, radius: float) -> float:
    """Hausdorff distance between the two sets clipped to the ball |x| <= radius."""
    pa = a.points[np.linalg.norm(a.points, axis=1) <= radius]
    pb = b.points[np.linalg.norm(b.points, axis=1) <= radius]
    if len(pa) == 0 or len(pb) == 0:
        raise EmptyIntersection("one of the sets has no point inside the comparison ball",
                                radius=radius, n_left=len(pa), n_right=len(pb))
    d_ab, _ = cKDTree(pb).query(pa)
    d_ba, _ = cKDTree(pa).query(pb)
    return float(max(d_ab.max(), d_ba.max()))


@dataclass(frozen=True)
class DeformationPath:
    """Linear interpolation between two matched point sets."""
    times: np.ndarray
    samples: list = field(repr=False)
    max_displacement: float = 0.0
    interpolation: str = "linear"

    def __len__(self):
        return len(self.samples)


def make_path(a: DeloneSet, b: DeloneSet, n_samples: int = 11) -> DeformationPath:
    """Match the two sets point-to-point and interpolate linearly.

    The matching minimizes total squared displacement (Hungarian assignment).
    It only counts as a deformation if every matched pair moves by less than
    the hard-core radius; otherwise identity of points along the path would be
    ambiguous and NoBijection is raised.  Every sample is revalidated as a
    DeloneSet with its measured packing radius.
    """
    if a.n != b.n:
        raise NoBijection(f"point counts differ: {a.n} vs {b.n}", n_left=a.n, n_right=b.n)
    if not np.allclose(a.window, b.window):
        raise ValueError("deformation endpoints must share a window")
    if n_samples < 2:
        raise ValueError("a path needs at least two samples")
    cost = np.sum((a.points[:, None, :] - b.points[None, :, :]) ** 2, axis=-1)
    rows, cols = linear_sum_assignment(cost)
    matched = b.points[cols[np.argsort(rows)]]
    disp = np.linalg.norm(matched - a.points, axis=1)
    max_disp = float(disp.max())
    r_min = min(a.r, b.r)
    if max_disp >= r_min:
        raise NoBijection(
            f"max matched displacement {max_disp:.6g} reaches the hard-core radius {r_min:.6g}",
            max_displacement=max_disp, r=r_min)
    times = np.linspace(0.0, 1.0, n_samples)
    R_path = max(a.R, b.R) + max_disp
    samples = []
    for t in times:
        pts = (1 - t) * a.points + t * matched
        if len(pts) > 1:
            d, _ = cKDTree(pts).query(pts, k=2)
            r_t = float(d[:, 1].min()) / 2
        else:
            r_t = r_min
        samples.append(DeloneSet(pts, a.window, r=r_t, R=R_path))
    return DeformationPath(times=times, samples=samples, max_displacement=max_disp)


# ---------------------------------------------------------------------------
# text format
#
#   # comment lines anywhere
#   dim r R
#   window lo_1 hi_1 ... lo_d hi_d
#   x_1 ... x_d        (one point per line)


def points_text(dset: DeloneSet) -> str:
    lines = [f"{dset.dim} {dset.r!r} {dset.R!r}",
             "window " + " ".join(repr(float(v)) for v in dset.window.ravel())]
    lines += [" ".join(repr(float(v)) for v in p) for p in dset.points]
    return "\n".join(lines) + "\n"


def write_points(dset: DeloneSet, path) -> None:
    with open(path, "w") as fh:
        fh.write(points_text(dset))


def read_points(path) -> DeloneSet:
    rows = []
    with open(path) as fh:
        for ln, raw in enumerate(fh, start=1):
            line = raw.split("#", 1)[0].strip()
            if line:
                rows.append((ln, line))
    if len(rows) < 3:
        raise FormatError("point file needs a header, a window line, and at least one point",
                          path=str(path))
    ln, head = rows[0]
    try:
        fields = head.split()
        dim, r, R = int(fields[0]), float(fields[1]), float(fields[2])
    except (ValueError, IndexError) as exc:
        raise FormatError(f"line {ln}: expected 'dim r R', got {head!r}", path=str(path)) from exc
    ln, wline = rows[1]
    wf = wline.split()
    if wf[0] != "window" or len(wf) != 1 + 2 * dim:
        raise FormatError(f"line {ln}: expected 'window' with {2 * dim} bounds", path=str(path))
    try:
        window = np.array([float(v) for v in wf[1:]]).reshape(dim, 2)
    except ValueError as exc:
        raise FormatError(f"line {ln}: non-numeric window bound", path=str(path)) from exc
    pts = []
    for ln, line in rows[2:]:
        fields = line.split()
        if len(fields) != dim:
            raise FormatError(f"line {ln}: expected {dim} coordinates, got {len(fields)}",
                              path=str(path))
        try:
            pts.append([float(v) for v in fields])
        except ValueError as exc:
            raise FormatError(f"line {ln}: non-numeric coordinate", path=str(path)) from exc
    return DeloneSet(np.array(pts), window, r=r, R=R)
