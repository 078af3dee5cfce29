"""Blow-up rescaling, free-boundary curves and classification of degenerate points.

Rescaled grids keep the point where it is: psi_m lives on X0 + X with
psi_m(X0 + X) = psi(X0 + r_m X) / r_m^kappa, so the weight x near the
point, and hence the density menu, is unchanged by rescaling.

Angles follow the polar convention of the profiles: theta is measured from
the +y axis, (x, y) = (r sin theta, r cos theta).
"""

from __future__ import annotations

import csv
import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from skimage import measure

from .densities import (
    DensityCurve,
    DensityLimit,
    DomainError,
    GridAnalysis,
    density_curve,
    extrapolate_limit,
    geometric_radii,
    reference_densities,
)
from .grid import DegeneratePoint, PointKind, StreamGrid, VorticityModel
from .quadrature import bilinear, gradient4, lagrange4
from .special_functions import cone_angle


class RescaleError(ValueError):
    """Rescaling window not covered by the source grid, or r_m too small."""


class FreeBoundaryError(ValueError):
    """No usable free-boundary curve near the point."""


DEFAULT_RESOLUTION = 256
ACCEPT_FRACTION = 1.0 / 3.0
ADMISSIBLE_TOL_DEG = 5.0
SIGN_SAMPLES = 16


# -- rescaling -----------------------------------------------------------------


def default_window(point: DegeneratePoint) -> float:
    """Half-width of the reference window; Type 1 windows stay clear of the axis."""
    if point.kind is PointKind.TYPE1:
        return min(1.0, 0.5 * point.x)
    return 1.0


def _local_box(point: DegeneratePoint, w: float):
    if point.kind is PointKind.TYPE1:
        return (-w, w), (-w, w)
    return (0.0, w), (-w, w)


def rescale(grid: StreamGrid, point: DegeneratePoint, r_m: float, window: float | None = None,
            resolution: int = DEFAULT_RESOLUTION, analysis: GridAnalysis | None = None) -> StreamGrid:
    """psi(X0 + r_m X) / r_m^kappa on X0 + window box, bicubic in the source.

    The source is the sign-extended field cut by its own zero level, so the
    free boundary is carried to sub-cell accuracy. Masked grids carry their
    level along, divided by r_m.
    """
    ana = analysis or GridAnalysis(grid)
    g = ana.grid
    w = window or default_window(point)
    h = max(g.dx, g.dy)
    if not r_m >= 4 * h:
        raise RescaleError(f"r_m={r_m:g} is below four source cells ({4 * h:g})")
    cx, cy = point.location
    (xa, xb), (ya, yb) = _local_box(point, w)
    if point.kind is PointKind.TYPE1 and w >= cx:
        raise RescaleError("Type 1 window must not reach the axis")
    if (cx + r_m * xa < g.x_min - 1e-12 or cx + r_m * xb > g.x_max + 1e-12
            or cy + r_m * ya < g.y_min - 1e-12 or cy + r_m * yb > g.y_max + 1e-12):
        raise RescaleError(f"window of half-width {w:g} at r_m={r_m:g} exceeds the grid")

    step = 2.0 * w / resolution
    nx = int(round((xb - xa) / step)) + 1
    ny = resolution + 1
    X = xa + step * np.arange(nx)
    Y = ya + step * np.arange(ny)
    XX, YY = np.meshgrid(X, Y, indexing="ij")
    sx, sy = cx + r_m * XX, cy + r_m * YY
    lvl = bilinear(ana.level, ana.geom, sx, sy)
    mask = None
    if ana.masked:
        vals = lagrange4(g.values, ana.geom, sx, sy)
        mask = lvl / r_m
    else:
        vals = np.where(lvl > 0, lagrange4(ana.psi_filled, ana.geom, sx, sy), 0.0)
    vals = np.maximum(vals, 0.0) / r_m ** point.kappa
    if point.kind is not PointKind.TYPE1:
        vals[0] = 0.0
    return StreamGrid(vals, cx + xa, cy + ya, step, step, mask)


@dataclass
class RescaledSequence:
    point: DegeneratePoint
    radii: np.ndarray
    grids: list
    window: float

    def __post_init__(self):
        self.radii = np.asarray(self.radii, dtype=float)
        if np.any(np.diff(self.radii) >= 0):
            raise ValueError("radii must be strictly decreasing")
        if len(self.grids) != self.radii.size:
            raise ValueError("one grid per radius")


def rescaled_sequence(grid: StreamGrid, point: DegeneratePoint, radii, window: float | None = None,
                      resolution: int = DEFAULT_RESOLUTION, threads: int = 1) -> RescaledSequence:
    ana = GridAnalysis(grid)
    w = window or default_window(point)
    radii = np.asarray(radii, dtype=float)

    def one(r):
        return rescale(grid, point, float(r), w, resolution, ana)

    if threads > 1:
        with ThreadPoolExecutor(threads) as pool:
            grids = list(pool.map(one, radii))
    else:
        grids = [one(r) for r in radii]
    return RescaledSequence(point, radii, grids, w)


@dataclass
class ConvergenceReport:
    distances: np.ndarray
    decreasing: bool
    flags: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return {"distances": self.distances.tolist(), "decreasing": self.decreasing,
                "flags": list(self.flags)}


def converge_check(seq: RescaledSequence) -> ConvergenceReport:
    """Weighted W^{1,2} distances of consecutive rescalings on 1/2 < |X| < 1."""
    if len(seq.grids) < 3:
        raise ValueError("need at least three rescaled grids")
    cx, cy = seq.point.location
    out = []
    for a, b in zip(seq.grids[:-1], seq.grids[1:]):
        d = a.values - b.values
        gx, gy = gradient4(d, a.dx, a.dy)
        X, Y = a.mesh()
        rho = np.hypot(X - cx, Y - cy) / seq.window
        sel = (rho > 0.5) & (rho < 1.0) & (X > 0)
        dens = (d * d + gx * gx + gy * gy) / np.where(sel, X, 1.0)
        out.append(float(np.sum(dens[sel]) * a.dx * a.dy))
    dist = np.array(out)
    decreasing = bool(np.all(np.diff(dist) < 0))
    flags = [] if decreasing else ["distances are not decreasing"]
    return ConvergenceReport(dist, decreasing, flags)


# -- free-boundary curves ------------------------------------------------------


@dataclass
class Branch:
    """Boundary samples leaving the point, ordered by arclength from it."""

    points: np.ndarray
    on_axis: bool


@dataclass
class FreeBoundaryCurve:
    """Polyline g(t) through the boundary point nearest X0.

    `samples` runs from the end of the second branch through g(0) to the
    end of the first; `t` is signed arclength. `side` is +1 when the fluid
    lies to the left of increasing t.
    """

    point: DegeneratePoint
    samples: np.ndarray
    t: np.ndarray
    branches: list
    side: int
    spacing: float
    flags: list = field(default_factory=list)

    @property
    def g0(self) -> np.ndarray:
        return self.samples[int(np.argmin(np.abs(self.t)))]

    def in_quarter_plane(self, tol: float | None = None) -> bool:
        tol = 2 * self.spacing if tol is None else tol
        s = self.samples
        return bool(np.all(s[:, 0] >= -tol) and np.all(s[:, 1] <= tol))

    def write_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            wr = csv.writer(fh)
            wr.writerow(["t", "x", "y"])
            for t, (x, y) in zip(self.t, self.samples):
                wr.writerow([repr(float(t)), repr(float(x)), repr(float(y))])


def _resample(poly: np.ndarray, step: float) -> np.ndarray:
    seg = np.hypot(*np.diff(poly, axis=0).T)
    keep = np.concatenate([[True], seg > 0])
    poly = poly[keep]
    if poly.shape[0] < 2:
        return poly
    s = np.concatenate([[0.0], np.cumsum(np.hypot(*np.diff(poly, axis=0).T))])
    q = np.arange(0.0, s[-1] + 1e-12, step)
    return np.column_stack([np.interp(q, s, poly[:, 0]), np.interp(q, s, poly[:, 1])])


def extract_free_boundary(grid: StreamGrid, point: DegeneratePoint,
                          analysis: GridAnalysis | None = None,
                          reach: float | None = None) -> FreeBoundaryCurve:
    """Marching-squares zero contour of the fluid level through the point.

    The axis column is forced out of the fluid so that an axis bounding the
    fluid shows up as a contour half a cell off the axis. Branches are cut
    where they first leave the disk of radius `reach` (default 64 cells).
    """
    ana = analysis or GridAnalysis(grid)
    g = ana.grid
    h = max(g.dx, g.dy)
    level = np.array(ana.level, dtype=float)
    if g.has_axis:
        level[0] = -np.abs(level[1])
        level[0][level[0] == 0.0] = -1.0
    contours = measure.find_contours(level, 0.0)
    cx, cy = point.location
    best = None
    for c in contours:
        pts = np.column_stack([g.x_min + c[:, 0] * g.dx, g.y_min + c[:, 1] * g.dy])
        d = np.hypot(pts[:, 0] - cx, pts[:, 1] - cy)
        k = int(np.argmin(d))
        if best is None or d[k] < best[0]:
            best = (float(d[k]), pts, k)
    if best is None or best[0] > 8 * h:
        raise FreeBoundaryError("no free boundary within 8 cells of the point")
    dmin, pts, k = best
    flags = []
    near = sum(
        1 for c in contours
        if np.min(np.hypot(g.x_min + c[:, 0] * g.dx - cx, g.y_min + c[:, 1] * g.dy - cy)) <= 4 * h
    )
    if near > 1:
        flags.append("non-manifold: several contours meet the point")
    closed = pts.shape[0] > 2 and np.allclose(pts[0], pts[-1])
    if closed:
        ring = pts[:-1]
        fwd = np.roll(ring, -k, axis=0)
        fwd = np.vstack([fwd, fwd[:1]])
        raw = [fwd, fwd[::-1]]
    else:
        raw = [pts[k:], pts[k::-1]]
    reach = reach or 64 * h
    branches = []
    for b in raw:
        if b.shape[0] < 2:
            continue
        r = np.hypot(b[:, 0] - cx, b[:, 1] - cy)
        out = np.nonzero(r > reach)[0]
        if out.size:
            b = b[: out[0] + 1]
        b = _resample(b, h)
        if b.shape[0] < 2:
            continue
        win = np.hypot(b[:, 0] - cx, b[:, 1] - cy) <= reach
        on_axis = bool(g.has_axis and np.median(b[win, 0]) < 1.5 * g.dx)
        branches.append(Branch(b, on_axis))
    if not branches:
        raise FreeBoundaryError("contour through the point is degenerate")
    first = branches[0].points
    if len(branches) > 1:
        second = branches[1].points
        samples = np.vstack([second[:0:-1], first])
        t = np.concatenate([-h * np.arange(second.shape[0] - 1, 0, -1), h * np.arange(first.shape[0])])
    else:
        samples, t = first, h * np.arange(first.shape[0])
    # fluid side: probe the level just left of the first segment of branch 0
    side = 0
    if first.shape[0] >= 3:
        d = first[2] - first[0]
        d = d / max(np.hypot(*d), 1e-300)
        probe = first[1] + 0.5 * h * np.array([-d[1], d[0]])
        side = 1 if float(bilinear(ana.level, ana.geom, probe[0], probe[1])) > 0 else -1
    return FreeBoundaryCurve(point, samples, t, branches, side, h, flags)


# -- tangents and sign changes -------------------------------------------------


def polar_angle(dx, dy):
    """theta in [0, 2 pi) measured from +y."""
    return np.mod(np.arctan2(dx, dy), 2 * math.pi)


@dataclass
class Tangent:
    theta: float  # radians, polar convention
    ratio: float  # the table's tangent quotient for this point type
    on_axis: bool
    fit_residual: float
    samples: int

    @property
    def degrees(self) -> float:
        return math.degrees(self.theta)

    @property
    def from_horizontal_deg(self) -> float:
        """Signed angle above the horizontal, in (-90, 90]."""
        a = 90.0 - self.degrees
        a = (a + 180.0) % 360.0 - 180.0
        if a > 90.0:
            a -= 180.0
        elif a <= -90.0:
            a += 180.0
        return a

    def to_dict(self) -> dict:
        return {
            "theta_rad": self.theta,
            "theta_deg": self.degrees,
            "from_horizontal_deg": self.from_horizontal_deg,
            "ratio": self.ratio,
            "on_axis": self.on_axis,
            "fit_residual": self.fit_residual,
            "samples": self.samples,
        }


def _ratio(point: DegeneratePoint, theta: float) -> float:
    s, c = math.sin(theta), math.cos(theta)
    if point.kind is PointKind.TYPE2:
        return s / c if c != 0 else math.inf  # g1 / (g2 - y0)
    return c / s if s != 0 else math.inf  # g2 / (g1 - x0) or g2 / g1


def branch_tangent(branch: Branch, point: DegeneratePoint, spacing: float,
                   inner: float = 3.0, outer: float = 40.0) -> Tangent | None:
    """Limit angle by fitting theta(d) = theta0 + a d^(1/2) + b d on inner..outer cells.

    d^(1/2) is the leading correction for boundaries perturbed at relative
    order r^(1/2) and for the 3/2-power cusps; the d term absorbs curvature.
    """
    cx, cy = point.location
    p = branch.points
    d = np.hypot(p[:, 0] - cx, p[:, 1] - cy)
    sel = (d >= inner * spacing) & (d <= outer * spacing)
    if sel.sum() < 4:
        return None
    if branch.on_axis:
        # the contour runs half a cell off the axis; the boundary is the axis itself
        theta = 0.0 if np.median(p[sel, 1]) > cy else math.pi
        return Tangent(theta, _ratio(point, theta), True, 0.0, int(sel.sum()))
    th = np.unwrap(polar_angle(p[sel, 0] - cx, p[sel, 1] - cy))
    A = np.column_stack([np.ones(sel.sum()), np.sqrt(d[sel]), d[sel]])
    coef, *_ = np.linalg.lstsq(A, th, rcond=None)
    res = th - A @ coef
    theta = float(np.mod(coef[0], 2 * math.pi))
    return Tangent(theta, _ratio(point, theta), branch.on_axis,
                   float(np.sqrt(np.mean(res**2))), int(sel.sum()))


def _coordinate(point: DegeneratePoint, p: np.ndarray) -> np.ndarray:
    if point.kind is PointKind.TYPE1:
        return p[:, 0] - point.x
    if point.kind is PointKind.TYPE2:
        return p[:, 1] - point.y
    return p[:, 0]


def branch_side_sign(branch: Branch, point: DegeneratePoint, spacing: float) -> int:
    """Sign of g1 - x0 (Type 1) or g2 - y0 (Type 2) along a branch, 0 if unresolved.

    A line fitted over the innermost samples is evaluated at the last of
    them and must exceed twice the fit residual and a quarter cell.
    """
    p = branch.points[1:SIGN_SAMPLES + 1]
    if p.shape[0] < 4:
        return 0
    c = _coordinate(point, p)
    t = np.arange(1, p.shape[0] + 1, dtype=float)
    A = np.column_stack([np.ones_like(t), t])
    coef, *_ = np.linalg.lstsq(A, c, rcond=None)
    res = c - A @ coef
    v = coef[0] + coef[1] * t[-1]
    if abs(v) > max(2.0 * float(np.sqrt(np.mean(res**2))), 0.25 * spacing):
        return int(np.sign(v))
    return 0


def admissible_angles(point: DegeneratePoint) -> tuple[float, ...]:
    """Tangent directions (radians) allowed at the point type."""
    if point.kind is PointKind.TYPE1:
        return (math.pi / 2, 2 * math.pi / 3, 4 * math.pi / 3, 3 * math.pi / 2)
    if point.kind is PointKind.TYPE2:
        return (0.0, math.pi)
    return (cone_angle().theta_star, math.pi / 2)


def _angle_gap_deg(a: float, b: float) -> float:
    d = abs((a - b + math.pi) % (2 * math.pi) - math.pi)
    return math.degrees(d)


# -- classification ------------------------------------------------------------


LABELS = {
    (PointKind.TYPE1, "StokesCorner"): "Stokes corner",
    (PointKind.TYPE1, "FlatUpper"): "horizontal flatness",
    (PointKind.TYPE1, "FlatLower"): "horizontal flatness",
    (PointKind.TYPE2, "FullHalfDisk"): "vertical cusp",
    (PointKind.TYPE2, "Null"): "cusp",
    (PointKind.TYPE3, "Bubble"): "Garabedian pointed bubble",
    (PointKind.TYPE3, "FlatUpper"): "horizontal flatness",
    (PointKind.TYPE3, "FlatLower"): "horizontal flatness",
    (PointKind.TYPE3, "Null"): "horizontal cusp",
}


@dataclass
class Classification:
    point: DegeneratePoint
    density_limit: DensityLimit
    curve: DensityCurve
    menu: list
    matched: str | None
    label: str | None
    confidence: float | None
    tangents: list
    sign_change: bool | None
    subcase: str | None
    flags: list = field(default_factory=list)

    @property
    def conclusive(self) -> bool:
        return self.label is not None

    def to_dict(self) -> dict:
        lim = self.density_limit
        return {
            "point": self.point.to_dict(),
            "kind": self.point.kind.value,
            "density_limit": {"value": lim.value, "error": lim.error, "alpha": lim.alpha,
                              "inconclusive": lim.inconclusive, "reason": lim.reason},
            "density_curve": self.curve.to_dict(),
            "menu": self.menu,
            "matched": self.matched,
            "label": self.label,
            "confidence": self.confidence,
            "tangents": [t.to_dict() for t in self.tangents],
            "sign_change": self.sign_change,
            "subcase": self.subcase,
            "flags": list(self.flags),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)


def match_menu(point: DegeneratePoint, value: float):
    """Nearest menu entry, accepted when closer than a third of its gap to the others."""
    entries = reference_densities(point)
    menu = [{"label": e.label, "value": e.value, "distance": abs(value - e.value)} for e in entries]
    best = min(range(len(entries)), key=lambda i: menu[i]["distance"])
    gap = min(abs(entries[best].value - e.value) for i, e in enumerate(entries) if i != best)
    dist = menu[best]["distance"]
    confidence = dist / gap
    accepted = confidence < ACCEPT_FRACTION
    return menu, entries[best].label, accepted, confidence


def classification_radii(ana: GridAnalysis, point: DegeneratePoint, n: int = 7) -> np.ndarray:
    h = max(ana.grid.dx, ana.grid.dy)
    r_max = 0.8 * ana.max_radius(point)
    # the smallest radius r_max / 8 must still span 16 cells across
    if r_max < 64 * h:
        raise DomainError(f"point needs {64 / 0.8:.0f} cells of room to every grid edge, "
                          f"has {ana.max_radius(point) / h:.0f}")
    return geometric_radii(r_max, r_max / 8.0, n)


def classify(grid: StreamGrid, vort: VorticityModel | None, point: DegeneratePoint,
             radii=None, threads: int = 1) -> Classification:
    """Density limit, nearest menu value, boundary tangents and sub-case.

    Failures downstream of the density fit leave explicit unknowns (None)
    and a flag rather than a guessed label.
    """
    ana = GridAnalysis(grid, vort)
    radii = classification_radii(ana, point) if radii is None else np.asarray(radii, float)
    curve = density_curve(ana, None, point, radii, threads=threads)
    limit = extrapolate_limit(curve)
    flags = []
    menu, best, accepted, confidence = match_menu(point, limit.value)
    matched = best if accepted and not limit.inconclusive else None
    if limit.inconclusive:
        flags.append("density fit inconclusive: " + limit.reason)
    elif not accepted:
        flags.append(f"density {limit.value:.6g} not within a third of the menu gap of {best}")

    tangents, signs = [], []
    branches_used = []
    try:
        fb = extract_free_boundary(ana.grid, point, ana)
        flags.extend(fb.flags)
        branches = fb.branches
        if point.kind is not PointKind.TYPE1:
            off = [b for b in branches if not b.on_axis]
            branches = off if (off or point.kind is PointKind.TYPE3) else branches
        branches_used = branches
        for b in branches:
            t = branch_tangent(b, point, fb.spacing)
            if t is None:
                flags.append("tangent fit has too few samples on a branch")
                continue
            tangents.append(t)
            gap = min(_angle_gap_deg(t.theta, a) for a in admissible_angles(point))
            if gap > ADMISSIBLE_TOL_DEG:
                flags.append(f"tangent {t.degrees:.2f} deg is {gap:.2f} deg from every admissible angle")
        signs = [branch_side_sign(b, point, fb.spacing) for b in branches_used]
    except FreeBoundaryError as exc:
        flags.append(f"free boundary unavailable: {exc}")

    sign_change = None
    if point.kind is not PointKind.TYPE3 and signs and all(s != 0 for s in signs):
        sign_change = len(signs) == 2 and signs[0] * signs[1] < 0

    label, subcase = None, None
    if matched is not None:
        label = LABELS.get((point.kind, matched))
        if point.kind is PointKind.TYPE1 and matched == "Null":
            if sign_change is None:
                flags.append("sign change of g1 - x0 undetermined: flatness or cusp")
            else:
                label = "horizontal flatness" if sign_change else "horizontal cusp"
                subcase = "sign change" if sign_change else "no sign change"
        elif point.kind is PointKind.TYPE2 and matched == "FullHalfDisk":
            if sign_change:
                subcase = "double vertical cusp"
            elif sign_change is False:
                subcase = "up vertical cusp" if signs[0] > 0 else "down vertical cusp"
        elif point.kind is PointKind.TYPE2:
            subcase = "no sign change" if sign_change is False else None
    return Classification(point, limit, curve, menu, matched, label, confidence,
                          tangents, sign_change, subcase, flags)
