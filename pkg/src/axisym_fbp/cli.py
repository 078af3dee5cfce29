"""Command-line interface: special, profiles, solve, analyze, classify.

Exit codes: 0 success, 2 bad arguments, 3 numeric failure, 4 unreadable
input file, 5 inconclusive classification (the report is still written).
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import math
import os
import sys
from dataclasses import asdict, dataclass, field
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import __version__
from .blowup import FreeBoundaryError, RescaleError, classify
from .densities import (
    DomainError,
    GridTooCoarseError,
    density_curve,
    extrapolate_limit,
    geometric_radii,
    monotonicity_residual,
)
from .grid import DegeneratePoint, GridFormatError, VorticityModel, read_grid, write_fbg, write_grid_csv
from .profiles import BlowupProfile, to_polar
from .solver import ConfigError, SolverConfig, SolverError, minimize
from .special_functions import (
    BracketError,
    LegendreDomainError,
    PoleError,
    SeriesConvergenceError,
    find_theta_star,
    legendre_eval,
    legendre_q1,
    legendre_q1_prime,
)

EXIT_OK = 0
EXIT_ARGS = 2
EXIT_NUMERIC = 3
EXIT_FORMAT = 4
EXIT_INCONCLUSIVE = 5
THREADS_ENV = "AXISYM_FBP_THREADS"


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


# -- manifest ------------------------------------------------------------------


def sha256_file(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


@dataclass
class RunManifest:
    command: list
    config_hash: str | None
    input_digests: dict
    library_version: str
    started: str
    finished: str = ""
    outputs: list = field(default_factory=list)

    @classmethod
    def start(cls, argv, config_text: str | None = None, inputs=()) -> "RunManifest":
        return cls(
            command=list(argv),
            config_hash=None if config_text is None else hashlib.sha256(config_text.encode()).hexdigest(),
            input_digests={str(p): sha256_file(p) for p in inputs},
            library_version=__version__,
            started=_now(),
        )

    def write(self, out_dir: Path) -> Path:
        self.finished = _now()
        path = out_dir / "manifest.json"
        self.outputs = sorted(set(self.outputs) - {path.name})
        path.write_text(json.dumps(asdict(self), indent=2, sort_keys=True) + "\n")
        return path


def _now() -> str:
    return datetime.now(timezone.utc).isoformat(timespec="seconds")


# -- helpers -------------------------------------------------------------------


def _threads(args) -> int:
    if args.threads is not None:
        n = args.threads
    else:
        env = os.environ.get(THREADS_ENV)
        try:
            n = int(env) if env else 1
        except ValueError:
            raise UsageError(f"{THREADS_ENV} must be an integer, got {env!r}")
    if n < 1:
        raise UsageError("thread count must be at least 1")
    return n


def _dump(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True, allow_nan=True) + "\n"


def _write_json(out_dir: Path, name: str, obj, manifest: RunManifest) -> None:
    (out_dir / name).write_text(_dump(obj))
    manifest.outputs.append(name)


def _parse_radii(text: str) -> np.ndarray:
    """'R_MAX:R_MIN' or 'R_MAX:R_MIN:N', geometric and decreasing."""
    parts = text.split(":")
    try:
        if len(parts) == 2:
            return geometric_radii(float(parts[0]), float(parts[1]))
        if len(parts) == 3:
            return geometric_radii(float(parts[0]), float(parts[1]), int(parts[2]))
    except ValueError as exc:
        raise UsageError(f"bad --radii {text!r}: {exc}")
    raise UsageError(f"bad --radii {text!r}: expected R_MAX:R_MIN[:N]")


def _point(text: str) -> DegeneratePoint:
    try:
        return DegeneratePoint.parse(text)
    except ValueError as exc:
        raise UsageError(str(exc))


def _vorticity(text: str) -> VorticityModel:
    try:
        return VorticityModel.parse(text)
    except ValueError as exc:
        raise UsageError(str(exc))


def _out_dir(path: str) -> Path:
    p = Path(path)
    p.mkdir(parents=True, exist_ok=True)
    return p


# -- special -------------------------------------------------------------------


def cmd_special(args) -> int:
    if args.theta_star == (args.eval is not None):
        raise UsageError("give exactly one of --theta-star and --eval")
    if args.theta_star:
        cone = find_theta_star(args.tol)
        ev = legendre_eval(1.5, cone.z_star)
        out = {"z_star": cone.z_star, "theta_star": cone.theta_star,
               "theta_star_degrees": cone.degrees, "dP_at_root": ev.derivative}
    else:
        if args.z is None:
            raise UsageError("--eval needs --z")
        if args.eval == "P":
            if args.nu is None:
                raise UsageError("--eval P needs --nu")
            ev = legendre_eval(args.nu, args.z)
            out = {"function": "P", "nu": args.nu, "z": args.z,
                   "value": ev.value, "derivative": ev.derivative}
        else:
            out = {"function": "Q1", "nu": 1.0, "z": args.z,
                   "value": legendre_q1(args.z), "derivative": legendre_q1_prime(args.z)}
    sys.stdout.write(_dump(out))
    return EXIT_OK


# -- profiles ------------------------------------------------------------------


def profile_table(kind: str, samples: int, x0: float = 1.0, y0: float = -1.0, C: float = 1.0):
    """(profile, rows) on a polar lattice about the profile's centre.

    Radii k R / n for k = 1..n with R = 1 (R = x0 / 2 for the Stokes corner)
    and n angles: [0, 2 pi) around a Type 1 point, [0, pi] at the axis.
    """
    if samples < 2:
        raise UsageError("--samples must be at least 2")
    if kind == "stokes":
        prof = BlowupProfile.stokes(x0)
        R = 0.5 * x0
        th = 2.0 * math.pi * np.arange(samples) / samples
    elif kind == "axis":
        prof = BlowupProfile.axis(C=C, y0=y0)
        R = 1.0
        th = math.pi * np.arange(samples) / (samples - 1)
    else:
        prof = BlowupProfile.garabedian()
        R = 1.0
        th = math.pi * np.arange(samples) / (samples - 1)
    r = R * np.arange(1, samples + 1) / samples
    RR, TT = np.meshgrid(r, th, indexing="ij")
    cx, cy = prof.center
    X = np.maximum(cx + RR * np.sin(TT), 0.0)
    Y = cy + RR * np.cos(TT)
    psi = prof.values(X, Y)
    gx, gy = prof.gradients(X, Y)
    rows = np.column_stack([RR.ravel(), TT.ravel(), X.ravel(), Y.ravel(), psi.ravel(),
                            (gx * gx + gy * gy).ravel()])
    return prof, rows


def cmd_profiles(args) -> int:
    prof, rows = profile_table(args.kind, args.samples, args.x0, args.y0, args.C)
    path = Path(args.out)
    if path.parent and not path.parent.exists():
        path.parent.mkdir(parents=True)
    with open(path, "w", newline="") as fh:
        fh.write(f"# profile {args.kind} kappa={prof.kappa!r}\n")
        if args.kind == "garabedian":
            fh.write(f"# C0={prof.C0!r} theta_star={prof.cone.theta_star!r}\n")
        wr = csv.writer(fh, lineterminator="\n")
        wr.writerow(["r", "theta", "x", "y", "psi", "grad2"])
        for row in rows:
            wr.writerow([repr(float(v)) for v in row])
    return EXIT_OK


# -- solve ---------------------------------------------------------------------


def cmd_solve(args) -> int:
    threads = _threads(args)
    try:
        text = Path(args.config).read_text()
    except OSError as exc:
        raise GridFormatError(f"cannot read config: {exc}")
    try:
        cfg = SolverConfig.from_dict(json.loads(text))
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{args.config}: {exc}")
    out = _out_dir(args.out)
    man = RunManifest.start(sys.argv if args.argv is None else args.argv, text, [args.config])
    res = minimize(cfg, threads=threads)
    write_fbg(out / "grid.fbg", res.grid)
    man.outputs.append("grid.fbg")
    if args.csv:
        write_grid_csv(out / "grid.csv", res.grid)
        man.outputs.append("grid.csv")
    summary = res.to_dict()
    summary["config"] = cfg.to_dict()
    _write_json(out, "result.json", summary, man)
    man.write(out)
    return EXIT_OK


# -- analyze -------------------------------------------------------------------


def _load_grid(path: str):
    try:
        return read_grid(path)
    except FileNotFoundError as exc:
        raise GridFormatError(f"cannot read grid: {exc}")


def cmd_analyze(args) -> int:
    threads = _threads(args)
    point = _point(args.point)
    vort = _vorticity(args.vorticity)
    radii = _parse_radii(args.radii)
    grid = _load_grid(args.grid)
    out = _out_dir(args.out)
    man = RunManifest.start(sys.argv if args.argv is None else args.argv, None, [args.grid])
    curve = density_curve(grid, vort, point, radii, threads=threads)
    report = {"curve": curve.to_dict()}
    try:
        report["limit"] = extrapolate_limit(curve).to_dict()
    except ValueError as exc:
        report["limit"] = None
        report["limit_error"] = str(exc)
    _write_json(out, "density_curve.json", report, man)
    with open(out / "density_curve.csv", "w", newline="") as fh:
        wr = csv.writer(fh, lineterminator="\n")
        wr.writerow(["r", "D", "quadrature_error"])
        for r, d, e in zip(curve.radii, curve.values, curve.quadrature_error):
            wr.writerow([repr(float(r)), repr(float(d)), repr(float(e))])
    man.outputs.append("density_curve.csv")
    try:
        mono = monotonicity_residual(grid, vort, point, radii).to_dict()
    except (DomainError, GridTooCoarseError) as exc:
        mono = {"error": str(exc)}
    _write_json(out, "monotonicity.json", mono, man)
    man.write(out)
    return EXIT_OK


# -- classify ------------------------------------------------------------------


def cmd_classify(args) -> int:
    threads = _threads(args)
    point = _point(args.point)
    vort = _vorticity(args.vorticity)
    radii = None if args.radii is None else _parse_radii(args.radii)
    grid = _load_grid(args.grid)
    out = _out_dir(args.out)
    man = RunManifest.start(sys.argv if args.argv is None else args.argv, None, [args.grid])
    c = classify(grid, vort, point, radii=radii, threads=threads)
    _write_json(out, "classification.json", c.to_dict(), man)
    man.write(out)
    sys.stdout.write(f"{point.label()}: {c.label if c.conclusive else 'inconclusive'}\n")
    return EXIT_OK if c.conclusive else EXIT_INCONCLUSIVE


# -- entry point ---------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="axisym-fbp", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    s = sub.add_parser("special", help="Legendre functions and the bubble cone angle")
    s.add_argument("--theta-star", action="store_true")
    s.add_argument("--tol", type=float, default=1e-14)
    s.add_argument("--eval", choices=("P", "Q1"))
    s.add_argument("--nu", type=float)
    s.add_argument("--z", type=float)
    s.set_defaults(func=cmd_special)

    s = sub.add_parser("profiles", help="sample a closed-form blow-up profile to CSV")
    s.add_argument("--kind", choices=("stokes", "axis", "garabedian"), required=True)
    s.add_argument("--samples", type=int, default=64)
    s.add_argument("--out", required=True)
    s.add_argument("--x0", type=float, default=1.0)
    s.add_argument("--y0", type=float, default=-1.0)
    s.add_argument("--C", type=float, default=1.0)
    s.set_defaults(func=cmd_profiles)

    for name, func, help_ in (("solve", cmd_solve, "minimise the energy for a JSON config"),
                              ("analyze", cmd_analyze, "density curve and monotonicity report"),
                              ("classify", cmd_classify, "classify a degenerate point")):
        s = sub.add_parser(name, help=help_)
        s.add_argument("--out", required=True)
        s.add_argument("--threads", type=int)
        if name == "solve":
            s.add_argument("--config", required=True)
            s.add_argument("--csv", action="store_true", help="also write the grid as CSV")
        else:
            s.add_argument("--grid", required=True)
            s.add_argument("--point", required=True)
            s.add_argument("--vorticity", default="zero")
            s.add_argument("--radii", required=name == "analyze")
        s.set_defaults(func=func)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        args.argv = None if argv is None else ["axisym-fbp", *argv]
        return args.func(args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ARGS
    except (GridFormatError, ConfigError) as exc:
        print(f"file format error: {exc}", file=sys.stderr)
        return EXIT_FORMAT
    except (LegendreDomainError, DomainError, GridTooCoarseError, RescaleError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ARGS
    except (SeriesConvergenceError, BracketError, PoleError, SolverError, FreeBoundaryError,
            FloatingPointError) as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ARGS


if __name__ == "__main__":
    sys.exit(main())
