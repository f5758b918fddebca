"""Command-line entry point.

Reports are byte-stable: JSON with sorted keys, derived only from the config
and seed.  BLAS threading is pinned to one thread before numpy loads so that
reduction order (and hence every last bit) is reproducible; the
APERIODIC_WANNIER_THREADS variable is accepted for outer-loop workers but
never changes numerical results.  Wall-clock time and library versions go to
manifest.json, never into report.json.

Exit codes: 0 success, 2 configuration problems, 3 failed checks or
anticipated runtime errors.  Machine-readable diagnostics go to stderr.
"""
from __future__ import annotations

import os

for _var in ("OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS", "OMP_NUM_THREADS",
             "NUMEXPR_NUM_THREADS", "VECLIB_MAXIMUM_THREADS"):
    os.environ[_var] = "1"

import argparse
import json
import sys
import time
from pathlib import Path

import numpy as np
import scipy

from . import __version__
from .chern import bloch_chern, chern_number
from .config import (ExperimentConfig, apply_overrides, config_hash, config_to_dict,
                     dumps_toml, load_config)
from .deform import field_sweep, lattice_deformation, resolvent_sweep
from .errors import ApwError, ConfigError
from .models import build_model, dichotomy_experiment, frame_suite, gapped_projection, \
    reference_gap_window
from .pointsets import generate, points_text, read_points, verify, write_points
from .spectral import detect_gaps


def _json_default(obj):
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.floating):
        return float(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    raise TypeError(f"not JSON-serializable: {type(obj).__name__}")


def _dump_json(payload: dict) -> str:
    return json.dumps(payload, sort_keys=True, indent=2, default=_json_default) + "\n"


def _emit(report: dict, args, command: str, cfg: ExperimentConfig | None,
          started: float, extra_files: dict | None = None) -> None:
    text = _dump_json(report)
    out = getattr(args, "out", None)
    if out:
        out_dir = Path(out)
        out_dir.mkdir(parents=True, exist_ok=True)
        (out_dir / "report.json").write_text(text)
        manifest = {
            "command": command,
            "argv": sys.argv[1:],
            "config_hash": config_hash(cfg) if cfg is not None else None,
            "seed": cfg.seed if cfg is not None else None,
            "versions": {"package": __version__, "python": sys.version.split()[0],
                         "numpy": np.__version__, "scipy": scipy.__version__},
            "wall_time_s": time.monotonic() - started,
        }
        (out_dir / "manifest.json").write_text(_dump_json(manifest))
        for name, content in (extra_files or {}).items():
            (out_dir / name).write_text(content)
        print(str(out_dir / "report.json"))
    else:
        sys.stdout.write(text)


def _load_cfg(args) -> ExperimentConfig:
    cfg = load_config(args.config) if getattr(args, "config", None) else ExperimentConfig()
    apply_overrides(cfg, getattr(args, "set", None))
    if getattr(args, "seed", None) is not None:
        cfg.seed = args.seed
    return cfg


# ---------------------------------------------------------------------------
# subcommands


def _cmd_gen(args) -> int:
    cfg = _load_cfg(args)
    g = cfg.generate
    window = np.asarray(g.window, dtype=float).reshape(-1, 2)
    params = {"square": {"pitch": g.pitch},
              "jittered": {"pitch": g.pitch, "displacement": g.displacement, "seed": cfg.seed},
              "hardcore": {"min_dist": g.min_dist, "seed": cfg.seed},
              "octagonal": {"scale": g.scale}}
    if g.kind not in params:
        raise ConfigError(f"generate.kind must be one of {sorted(params)}", key="generate.kind")
    dset = generate(g.kind, window, **params[g.kind])
    if args.points_out:
        write_points(dset, args.points_out)
        print(args.points_out)
    else:
        sys.stdout.write(points_text(dset))
    return 0


def _cmd_verify(args) -> int:
    started = time.monotonic()
    dset = read_points(args.points)
    report = verify(dset, probe_pitch=args.probe_pitch).as_dict()
    report["n_points"] = dset.n
    report["declared"] = {"r": dset.r, "R": dset.R}
    _emit(report, args, "verify", None, started)
    if not (report["packing_ok"] and report["covering_ok"]):
        sys.stderr.write(_dump_json({"error": "DensityViolated",
                                     "message": "declared Delone bounds not met",
                                     "context": report}))
        return 3
    return 0


def _cmd_spectrum(args) -> int:
    started = time.monotonic()
    cfg = _load_cfg(args)
    m = cfg.model
    _, _, op = build_model(m.kind, m.L, p=m.p, q=m.q, t=m.t, stagger=m.stagger)
    evals = np.linalg.eigvalsh(op.matrix)
    gaps = detect_gaps(evals, min_gap=args.min_gap)
    report = {
        "model": config_to_dict(cfg)["model"],
        "n": int(op.n),
        "spectrum_bounds": [float(evals[0]), float(evals[-1])],
        "gaps": [g.as_dict() for g in gaps],
    }
    csv = "index,eigenvalue\n" + "".join(f"{i},{v!r}\n" for i, v in enumerate(evals))
    _emit(report, args, "spectrum", cfg, started, extra_files={"eigenvalues.csv": csv})
    return 0


def _cmd_chern(args) -> int:
    started = time.monotonic()
    cfg = _load_cfg(args)
    m = cfg.model
    dset, _, op = build_model(m.kind, m.L, p=m.p, q=m.q, t=m.t, stagger=m.stagger)
    window = reference_gap_window(m.kind, p=m.p, q=m.q, t=m.t, stagger=m.stagger)
    gap, proj = gapped_projection(op, window)
    result = chern_number(proj, fractions=tuple(cfg.chern.fractions))
    report = {"model": config_to_dict(cfg)["model"], "gap": gap.as_dict(),
              "rank": proj.rank, "chern": result.as_dict(),
              "integrality": bool(abs(result.value - round(result.value))
                                  < cfg.chern.tolerance)}
    if cfg.chern.compare_oracle and m.kind == "hofstadter":
        oracle = bloch_chern(m.p, m.q, bands=[0], t=m.t)
        report["oracle"] = {"value": oracle,
                            "deviation": abs(result.value - oracle)}
    elif cfg.chern.compare_oracle and m.kind == "checkerboard":
        report["oracle"] = {"value": 0, "deviation": abs(result.value)}
    _emit(report, args, "chern", cfg, started)
    return 0


def _cmd_frame(args) -> int:
    started = time.monotonic()
    cfg = _load_cfg(args)
    m = cfg.model
    report = frame_suite(m.kind, m.L, p=m.p, q=m.q, t=m.t, stagger=m.stagger,
                         n_probes=cfg.frame.n_probes,
                         interior_margin=cfg.frame.interior_margin, seed=cfg.seed)
    _emit(report, args, "frame", cfg, started)
    return 0


def _cmd_dichotomy(args) -> int:
    started = time.monotonic()
    cfg = _load_cfg(args)
    m = cfg.model
    report = dichotomy_experiment(m.kind, sizes=tuple(cfg.dichotomy.sizes), p=m.p,
                                  q=m.q, t=m.t, stagger=m.stagger,
                                  interior_margin=cfg.dichotomy.interior_margin)
    _emit(report, args, "dichotomy", cfg, started)
    return 0


def _cmd_deform(args) -> int:
    started = time.monotonic()
    cfg = _load_cfg(args)
    m = cfg.model
    d = cfg.deform
    if d.mode == "lattice":
        report = lattice_deformation(L=m.L, p=m.p, q=m.q, t=m.t,
                                     n_samples=d.n_samples,
                                     displacement=d.displacement, seed=cfg.seed)
    elif d.mode == "field":
        report = field_sweep(L=m.L, p=m.p, q=m.q, t=m.t, n_samples=d.n_samples,
                             rel_span=d.rel_span)
    else:
        raise ConfigError(f"deform.mode must be 'lattice' or 'field', got {d.mode!r}",
                          key="deform.mode")
    _emit(report, args, "deform", cfg, started)
    return 0


def _cmd_resolvent(args) -> int:
    started = time.monotonic()
    cfg = _load_cfg(args)
    r = cfg.resolvent
    report = resolvent_sweep(pitch=r.pitch, theta=r.theta,
                             z=complex(r.z_real, r.z_imag), n_samples=r.n_samples,
                             amplitude=r.amplitude, radius=r.radius)
    _emit(report, args, "resolvent", cfg, started)
    return 0


def _cmd_config(args) -> int:
    cfg = _load_cfg(args)
    sys.stdout.write(dumps_toml(cfg))
    sys.stdout.write(f"# hash: {config_hash(cfg)}\n")
    return 0


def _add_common(sub, config: bool = True, out: bool = True):
    if config:
        sub.add_argument("--config", help="TOML config file")
        sub.add_argument("--set", action="append", metavar="KEY=VALUE",
                         help="override a config entry (dotted key)")
        sub.add_argument("--seed", type=int, help="override the seed")
    if out:
        sub.add_argument("--out", help="directory for report.json and manifest.json")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="aperiodic-wannier",
        description="Spectral projections, translate frames, and Chern markers "
                    "on Delone point sets")
    parser.add_argument("--version", action="version", version=__version__)
    subs = parser.add_subparsers(dest="command", required=True)

    s = subs.add_parser("gen", help="generate a point set")
    _add_common(s, out=False)
    s.add_argument("--points-out", help="output file (default stdout)")
    s.set_defaults(fn=_cmd_gen)

    s = subs.add_parser("verify", help="check the Delone bounds of a point file")
    s.add_argument("points")
    s.add_argument("--probe-pitch", type=float, default=None)
    _add_common(s, config=False)
    s.set_defaults(fn=_cmd_verify)

    s = subs.add_parser("spectrum", help="eigenvalues and gaps of a model")
    _add_common(s)
    s.add_argument("--min-gap", type=float, default=0.02)
    s.set_defaults(fn=_cmd_spectrum)

    s = subs.add_parser("chern", help="real-space Chern number of the gapped band")
    _add_common(s)
    s.set_defaults(fn=_cmd_chern)

    s = subs.add_parser("frame", help="Parseval frame construction and residuals")
    _add_common(s)
    s.set_defaults(fn=_cmd_frame)

    s = subs.add_parser("dichotomy", help="localization dichotomy across window sizes")
    _add_common(s)
    s.set_defaults(fn=_cmd_dichotomy)

    s = subs.add_parser("deform", help="gap and Chern tracking along a deformation")
    _add_common(s)
    s.set_defaults(fn=_cmd_deform)

    s = subs.add_parser("resolvent", help="resolvent continuity sweep (continuum)")
    _add_common(s)
    s.set_defaults(fn=_cmd_resolvent)

    s = subs.add_parser("config", help="print the effective config as TOML")
    _add_common(s, out=False)
    s.set_defaults(fn=_cmd_config)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except ConfigError as exc:
        sys.stderr.write(_dump_json({"error": type(exc).__name__, "message": str(exc),
                                     "context": exc.context}))
        return 2
    except ApwError as exc:
        sys.stderr.write(_dump_json({"error": type(exc).__name__, "message": str(exc),
                                     "context": exc.context}))
        return 3


if __name__ == "__main__":
    sys.exit(main())
