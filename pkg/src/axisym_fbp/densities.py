"""Weighted density functionals, their limits, and the monotonicity identities.

For a degenerate point X0 with exponent kappa and radius r:

    D1(r) = int_{B_r^+} (1/x)|grad psi|^2 - x y I - x psi f(psi)
    D2(r) = int_{dB_r^+} psi^2 / x

and the scaled density is r^-3 D1 - 3/2 r^-4 D2 (Type 1),
r^-3 D1 - 2 r^-4 D2 (Type 2), r^-4 D1 - 5/2 r^-5 D2 (Type 3).

Free-boundary cells are integrated against a sign-extended copy of psi: the
positive values are continued across the boundary by extrapolation, so the
zero level of the extension locates the boundary to second order and the
gradient terms see smooth data up to it.
"""

from __future__ import annotations

import itertools
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .grid import DegeneratePoint, PointKind, StreamGrid, VorticityModel
from .quadrature import GridGeometry, arc_integral, ball_rule, bilinear, gradient4, lagrange4
from .special_functions import cone_angle


class DomainError(ValueError):
    """Ball does not fit inside the grid."""


class GridTooCoarseError(ValueError):
    """Fewer than 16 cells across the ball."""


EXTENSION_LAYERS = 5
ARC_NODES = 1024


# -- per-grid preprocessing ----------------------------------------------------


class GridAnalysis:
    """Read-only derived fields of one grid, shared by all radii.

    In the default mode psi-terms and the indicator term are integrated over
    the extended level set. With a mask override, psi-terms are integrated
    over the whole half-ball and only the indicator term is restricted.
    """

    def __init__(self, grid: StreamGrid, vort: VorticityModel | None = None,
                 arc_nodes: int = ARC_NODES):
        self.grid = grid
        self.vort = vort or VorticityModel()
        self.geom = GridGeometry.of(grid)
        self.arc_nodes = arc_nodes
        self.masked = grid.mask is not None
        vals = grid.values
        if self.masked:
            m = grid.mask
            self.level = np.where(m, 0.5, -0.5) if m.dtype == bool else np.asarray(m, float)
            self.psi = vals
        else:
            inside = vals > grid.eps_mask
            if grid.has_axis:
                # the axis is part of the fluid wherever its neighbour column is
                inside[0] = inside[1]
            ext = extend_positive(vals, inside)
            self.psi = ext
            scale = max(float(vals.max()), 1.0)
            lvl = np.where(inside, ext, np.minimum(np.nan_to_num(ext, nan=-scale), 0.0))
            if grid.has_axis:
                lvl[0] = lvl[1]
                self.psi[0] = 0.0
            self.level = lvl
        self.gx, self.gy = gradient4(np.nan_to_num(self.psi, nan=0.0), grid.dx, grid.dy)
        self.psi_filled = np.nan_to_num(self.psi, nan=0.0)

    # region handling -----------------------------------------------------

    def psi_level(self):
        return None if self.masked else self.level

    def _fields(self):
        return {"psi": self.psi_filled, "gx": self.gx, "gy": self.gy}

    def check_ball(self, point: DegeneratePoint, r: float) -> None:
        g = self.grid
        h = max(g.dx, g.dy)
        if not r > 0:
            raise DomainError("radius must be positive")
        if 2.0 * r < 16.0 * h:
            raise GridTooCoarseError(f"r={r:g} spans fewer than 16 cells (h={h:g})")
        cx, cy = point.location
        m = 2.0 * h
        if point.kind is PointKind.TYPE1:
            if r >= cx:
                raise DomainError("Type 1 balls must stay off the axis (r < x0)")
            lo_x = cx - r
        else:
            if not g.has_axis:
                raise DomainError("axis points need a grid that starts at x = 0")
            lo_x = g.x_min + m
        if lo_x < g.x_min + m or cx + r > g.x_max - m or cy - r < g.y_min + m or cy + r > g.y_max - m:
            raise DomainError(f"B_r(X0) with r={r:g} leaves the grid")

    def max_radius(self, point: DegeneratePoint) -> float:
        g = self.grid
        m = 2.0 * max(g.dx, g.dy)
        cx, cy = point.location
        room = min(g.x_max - m - cx, cy - g.y_min - m, g.y_max - m - cy)
        if point.kind is PointKind.TYPE1:
            room = min(room, cx - g.x_min - m, 0.999 * cx)
        return room

    # integrals ---------------------------------------------------------------

    def rules(self, point, r):
        cx, cy = point.location
        rin = ball_rule(self.geom, cx, cy, r, self.level)
        rpsi = ball_rule(self.geom, cx, cy, r, None) if self.masked else rin
        return rpsi, rin

    def volume(self, point, r, psi_term=None, ind_term=None, rules=None) -> float:
        rpsi, rin = rules or self.rules(point, r)
        total = 0.0
        if psi_term is not None:
            total += rpsi.integrate(psi_term, self._fields())
        if ind_term is not None:
            total += rin.integrate(lambda x, y, **_: ind_term(x, y), {})
        return total

    def arc(self, point, r, term) -> float:
        """Arc integral of term(x, y, psi, gx, gy, nx, ny)."""
        cx, cy = point.location
        g = self.geom
        f = self._fields()

        def sample(x, y):
            vals = {k: lagrange4(v, g, x, y) for k, v in f.items()}
            return term(x, y, nx=(x - cx) / r, ny=(y - cy) / r, **vals)

        # bilinear keeps the level monotone next to the jump at the band edge
        level_fn = None if self.masked else (lambda x, y: bilinear(self.level, g, x, y))
        if point.kind is PointKind.TYPE1:
            return arc_integral(sample, cx, cy, r, 0.0, 2 * math.pi, self.arc_nodes, True, level_fn)
        return arc_integral(sample, cx, cy, r, 0.0, math.pi, self.arc_nodes, False, level_fn,
                            axis_ends=True)

    def d1(self, point, r, rules=None) -> float:
        self.check_ball(point, r)
        vort = self.vort

        def psi_term(x, y, psi, gx, gy):
            out = (gx * gx + gy * gy) / x
            if not vort.is_zero:
                out = out - x * psi * vort.f(psi)
            return out

        return self.volume(point, r, psi_term, lambda x, y: -x * y, rules)

    def d2(self, point, r) -> float:
        self.check_ball(point, r)
        return self.arc(point, r, lambda x, y, psi, **_: psi * psi / x)

    def density(self, point, r) -> float:
        k = point.kappa
        p = 3 if point.kind is not PointKind.TYPE3 else 4
        return r ** -p * self.d1(point, r) - k * r ** -(p + 1) * self.d2(point, r)


def extend_positive(values: np.ndarray, inside: np.ndarray) -> np.ndarray:
    from .quadrature import extend_field

    return extend_field(values, inside, EXTENSION_LAYERS)


def _analysis(grid, vort=None) -> GridAnalysis:
    if isinstance(grid, GridAnalysis):
        return grid
    return GridAnalysis(grid, vort)


def d1(grid, vort: VorticityModel | None, point: DegeneratePoint, r: float) -> float:
    """Volume functional D1 over B_r^+(X0)."""
    return _analysis(grid, vort).d1(point, r)


def d2(grid, point: DegeneratePoint, r: float) -> float:
    """Boundary functional D2 over the arc of dB_r^+(X0)."""
    return _analysis(grid).d2(point, r)


def density(grid, vort: VorticityModel | None, point: DegeneratePoint, r: float) -> float:
    return _analysis(grid, vort).density(point, r)


# -- density curves ------------------------------------------------------------


@dataclass
class DensityCurve:
    point: DegeneratePoint
    radii: np.ndarray
    values: np.ndarray
    quadrature_error: np.ndarray

    def __post_init__(self):
        self.radii = np.asarray(self.radii, dtype=float)
        self.values = np.asarray(self.values, dtype=float)
        self.quadrature_error = np.asarray(self.quadrature_error, dtype=float)
        if np.any(np.diff(self.radii) >= 0):
            raise ValueError("radii must be strictly decreasing")

    def to_dict(self) -> dict:
        return {
            "point": self.point.to_dict(),
            "radii": self.radii.tolist(),
            "values": self.values.tolist(),
            "quadrature_error": self.quadrature_error.tolist(),
        }


def _coarsened(grid: StreamGrid) -> StreamGrid:
    mask = None if grid.mask is None else grid.mask[::2, ::2]
    return StreamGrid(grid.values[::2, ::2], grid.x_min, grid.y_min, 2 * grid.dx, 2 * grid.dy, mask)


def geometric_radii(r_max: float, r_min: float, n: int | None = None) -> np.ndarray:
    if not (r_max > r_min > 0):
        raise ValueError("need r_max > r_min > 0")
    if n is None:
        n = int(round(2 * math.log2(r_max / r_min))) + 1
    return np.geomspace(r_max, r_min, max(n, 2))


def density_curve(grid, vort: VorticityModel | None, point: DegeneratePoint, radii,
                  estimate_error: bool = True, threads: int = 1) -> DensityCurve:
    """D(r) on the given radii with a two-grid error estimate.

    The error estimate compares with the same grid coarsened by two,
    |D_h - D_2h| / 3 for a second-order rule; radii too small for the
    coarse grid get the nearest available estimate scaled by (r_c / r)^2.
    """
    ana = _analysis(grid, vort)
    radii = np.asarray(radii, dtype=float)

    def one(r):
        return ana.density(point, float(r))

    if threads > 1:
        with ThreadPoolExecutor(threads) as pool:
            values = np.array(list(pool.map(one, radii)))
    else:
        values = np.array([one(r) for r in radii])
    err = np.zeros_like(values)
    if estimate_error:
        coarse = GridAnalysis(_coarsened(ana.grid), ana.vort, ana.arc_nodes)
        have = np.zeros(radii.size, dtype=bool)
        for i, r in enumerate(radii):
            try:
                err[i] = abs(values[i] - coarse.density(point, float(r))) / 3.0
                have[i] = True
            except (GridTooCoarseError, DomainError):
                pass
        if have.any() and not have.all():
            last = np.nonzero(have)[0][-1]
            for i in np.nonzero(~have)[0]:
                err[i] = err[last] * (radii[last] / radii[i]) ** 2
    return DensityCurve(point, radii, values, err)


@dataclass
class DensityLimit:
    value: float
    error: float
    alpha: float | None
    deviations: np.ndarray
    inconclusive: bool = False
    reason: str = ""
    exponents: tuple = ()

    def to_dict(self) -> dict:
        return {
            "value": None if self.inconclusive else self.value,
            "estimate": self.value,
            "error": self.error,
            "alpha": self.alpha,
            "exponents": list(self.exponents),
            "deviations": np.asarray(self.deviations).tolist(),
            "inconclusive": self.inconclusive,
            "reason": self.reason,
        }


EXPONENT_LADDER = (0.5, 1.0, 1.5, 2.0, 2.5, 3.0)
MAX_TERMS = 3


def _fit(r, d, exps):
    A = np.column_stack([np.ones_like(r)] + [r**a for a in exps])
    coef, *_ = np.linalg.lstsq(A, d, rcond=None)
    res = d - A @ coef
    dof = max(r.size - A.shape[1], 1)
    cov = float(np.sum(res**2)) / dof * np.linalg.pinv(A.T @ A)
    return {
        "exps": tuple(exps), "d0": float(coef[0]), "res": res,
        "rms": float(np.sqrt(np.mean(res**2))), "max": float(np.max(np.abs(res))),
        "se": math.sqrt(max(cov[0, 0], 0.0)),
    }


def extrapolate_limit(curve: DensityCurve, ladder=EXPONENT_LADDER, max_terms: int = MAX_TERMS,
                      noise_floor: float = 1e-8) -> DensityLimit:
    """D(0+) from least-squares fits D(r) = D0 + sum_k c_k r^alpha_k.

    Candidate models take one to `max_terms` exponents from `ladder`, never
    leaving fewer than three degrees of freedom. The fewest-term model whose
    residuals stay within three quadrature errors (plus a relative floor)
    wins, ties going to the smaller rms. A curve that no model describes that
    well is flagged inconclusive. The error adds the standard error of D0,
    the spread of D0 across admissible models of the winning size, and the
    quadrature error.
    """
    r = curve.radii
    d = curve.values
    if r.size < 4 or r.max() / r.min() < 8.0 - 1e-9:
        raise ValueError("need at least 4 radii spanning a factor of 8")
    qerr = float(np.max(curve.quadrature_error)) if curve.quadrature_error.size else 0.0
    scale = max(1.0, float(np.max(np.abs(d))))
    tol = 3.0 * qerr + noise_floor * scale
    best, good, fits = None, [], []
    for k in range(1, min(max_terms, r.size - 3) + 1):
        fits = [_fit(r, d, m) for m in itertools.combinations(ladder, k)]
        good = [f for f in fits if f["max"] <= tol]
        if good:
            best = min(good, key=lambda f: f["rms"])
            break
    if best is not None:
        spread = float(np.ptp([f["d0"] for f in good]))
        inconclusive, reason = False, ""
    else:
        best = min(fits, key=lambda f: f["rms"])
        spread = 0.0
        inconclusive = True
        reason = (f"fit residual {best['max']:.3e} exceeds 3x quadrature error "
                  f"{qerr:.3e} for every model")
    error = math.hypot(best["se"], spread) + qerr
    return DensityLimit(best["d0"], error, best["exps"][0], best["res"], inconclusive, reason,
                        best["exps"])


# -- reference menus -----------------------------------------------------------


@dataclass(frozen=True)
class MenuEntry:
    label: str
    value: float


def reference_densities(point: DegeneratePoint) -> list[MenuEntry]:
    """Admissible values of D(0+) at a degenerate point.

    Type 1, with weight x0: -x0 int_{B1} y over the 120 degree cone
    (sqrt(3)/3 x0), over y > 0 (-2/3 x0), over y < 0 (+2/3 x0), or 0.
    Type 2: -y0 int_{B1^+} x = -2/3 y0, or 0. Type 3: -int x y over the
    bubble cone (-sin^2 theta* / 8), over y > 0 (-1/8), y < 0 (+1/8), or 0.
    """
    if point.kind is PointKind.TYPE1:
        x0 = point.x
        return [
            MenuEntry("StokesCorner", math.sqrt(3.0) / 3.0 * x0),
            MenuEntry("FlatUpper", -2.0 / 3.0 * x0),
            MenuEntry("FlatLower", 2.0 / 3.0 * x0),
            MenuEntry("Null", 0.0),
        ]
    if point.kind is PointKind.TYPE2:
        return [MenuEntry("FullHalfDisk", -2.0 / 3.0 * point.y), MenuEntry("Null", 0.0)]
    ts = cone_angle().theta_star
    return [
        MenuEntry("Bubble", -math.sin(ts) ** 2 / 8.0),
        MenuEntry("FlatUpper", -1.0 / 8.0),
        MenuEntry("FlatLower", 1.0 / 8.0),
        MenuEntry("Null", 0.0),
    ]


# -- monotonicity identities ---------------------------------------------------


@dataclass
class MonotonicityReport:
    """Term-by-term check of dD/dr = sum of right-hand terms.

    `relative_residual` divides by |lhs| + sum |terms| when that is at
    least `floor_fraction` of |D|/r, and by |D|/r otherwise, the natural
    size of dD/dr for a density of order D varying on the scale r. The
    second branch applies to homogeneous profiles, where every term
    vanishes identically. A residual with zero scale (psi = 0) counts as 0.
    """

    point: DegeneratePoint
    radii: np.ndarray
    density: np.ndarray
    lhs: np.ndarray
    rhs_terms: dict
    residual: np.ndarray
    scale: np.ndarray
    step: float
    flags: list = field(default_factory=list)

    @property
    def rhs(self) -> np.ndarray:
        return sum(np.asarray(v) for v in self.rhs_terms.values())

    @property
    def relative_residual(self) -> np.ndarray:
        res = np.abs(np.asarray(self.residual, dtype=float))
        scale = np.asarray(self.scale, dtype=float)
        out = np.zeros_like(res)
        np.divide(res, scale, out=out, where=scale > 0)
        return np.where((scale > 0) | (res == 0), out, np.inf)

    def to_dict(self) -> dict:
        return {
            "point": self.point.to_dict(),
            "radii": np.asarray(self.radii).tolist(),
            "density": np.asarray(self.density).tolist(),
            "lhs": np.asarray(self.lhs).tolist(),
            "rhs_terms": {k: np.asarray(v).tolist() for k, v in self.rhs_terms.items()},
            "residual": np.asarray(self.residual).tolist(),
            "relative_residual": self.relative_residual.tolist(),
            "log_step": self.step,
            "flags": list(self.flags),
        }


TERM_NAMES = ("boundary_square", "J1", "boundary_x_weight", "K", "vorticity_volume")


def monotonicity_terms(ana: GridAnalysis, point: DegeneratePoint, r: float) -> dict:
    """Right-hand side of the monotonicity identity at radius r."""
    ana.check_ball(point, r)
    vort = ana.vort
    k = point.kappa
    cx, cy = point.location
    rules = ana.rules(point, r)
    t1 = point.kind is PointKind.TYPE1
    p = 4 if point.kind is PointKind.TYPE3 else 3

    def bsq(x, y, psi, gx, gy, nx, ny):
        return (gx * nx + gy * ny - k * psi / r) ** 2 / x

    terms = dict.fromkeys(TERM_NAMES, 0.0)
    terms["boundary_square"] = 2.0 * r ** -p * ana.arc(point, r, bsq)

    if t1:
        j1 = ana.volume(
            point, r,
            lambda x, y, psi, gx, gy: (x - cx) / (x * x) * (gx * gx + gy * gy),
            lambda x, y: (x - cx) * y,
            rules,
        )
        terms["J1"] = -r**-4 * j1
        xw = ana.arc(point, r, lambda x, y, psi, **_: (x - cx) / (x * x) * psi * psi)
        terms["boundary_x_weight"] = 1.5 * r**-5 * xw
    else:
        ind = ana.volume(point, r, None, lambda x, y: (y - cy) * x, rules)
        if point.kind is PointKind.TYPE2:
            terms["J1"] = -r**-4 * ind

    if not vort.is_zero:
        F, f = vort.F, vort.f
        if t1:
            kv = ana.volume(point, r, lambda x, y, psi, gx, gy: 2 * F(psi) * (x - cx) + 4 * x * F(psi),
                            None, rules)
        else:
            kv = ana.volume(point, r, lambda x, y, psi, gx, gy: 6 * x * F(psi), None, rules)
        kb = ana.arc(point, r, lambda x, y, psi, **_: 2 * x * F(psi) - x * psi * f(psi))
        terms["K"] = -r ** -(p + 1) * (kv - r * kb)
        if not t1:
            vv = ana.volume(point, r, lambda x, y, psi, gx, gy: x * psi * f(psi), None, rules)
            terms["vorticity_volume"] = -r ** -(p + 1) * vv
    return terms


def monotonicity_residual(grid, vort: VorticityModel | None, point: DegeneratePoint, radii,
                          step: float = 0.05, floor_fraction: float = 1e-3) -> MonotonicityReport:
    """Compare a 5-point log-radius derivative of D with the identity's terms.

    dD/dr = (1/r) dD/ds with s = log r, and dD/ds from the fourth-order
    stencil on s + {-2, -1, 1, 2} step.
    """
    ana = _analysis(grid, vort)
    radii = np.asarray(radii, dtype=float)
    flags = []
    lhs, dens, scale = [], [], []
    terms = {k: [] for k in TERM_NAMES}
    h = max(ana.grid.dx, ana.grid.dy)
    for r in radii:
        rs = r * np.exp(step * np.array([-2, -1, 0, 1, 2]))
        ana.check_ball(point, float(rs[-1]))
        ana.check_ball(point, float(rs[0]))
        D = [ana.density(point, float(q)) for q in rs]
        dDds = (D[0] - 8 * D[1] + 8 * D[3] - D[4]) / (12 * step)
        lhs.append(dDds / r)
        dens.append(D[2])
        t = monotonicity_terms(ana, point, float(r))
        for k_ in TERM_NAMES:
            terms[k_].append(t[k_])
        if step * r < 2 * h:
            flags.append(f"finite-difference step {step * r:.3g} below two cells at r={r:g}")
    lhs = np.array(lhs)
    dens = np.array(dens)
    terms = {k: np.array(v) for k, v in terms.items()}
    rhs = sum(terms.values())
    res = lhs - rhs
    size = np.abs(lhs) + sum(np.abs(v) for v in terms.values())
    natural = np.abs(dens) / radii
    scale = np.where(size >= floor_fraction * natural, size, np.maximum(natural, 1e-300))
    return MonotonicityReport(point, radii, dens, lhs, terms, res, scale, step, flags)
