"""Direct minimisation of the discretised energy on simple nozzle geometries.

The energy is

    J(psi) = int |grad psi|^2 / x - 2 x F(psi) - x y H(psi) dX

with H(s) = clamp(s / eps_H, 0, 1) standing in for the fluid indicator.
The Dirichlet part is an edge-midpoint rule (the five-point finite-volume
stencil with 1/x taken at edge midpoints); the remaining terms use the
midpoint of each cell with psi averaged over its corners.

Geometries, all on [x_min, x_max] x [y_min, y_max] in the shifted
coordinate where the free-boundary condition reads |grad psi|^2 = -x^2 y:

* tube_bubble: axis psi = 0, tube wall x = x_max at psi = Q, inlet on the
  top edge carrying the inflow profile, bottom edge left free (natural
  outflow condition).
* rising_jet: axis psi = 0, inlet on the bottom edge for x < nozzle_radius,
  psi = Q on the rest of the bottom edge and on x = x_max, top edge free.
* rectangle: Dirichlet data on all four edges, either the uniform flow
  Q (x / x_max)^2 or a manufactured solution.
"""

from __future__ import annotations

import dataclasses
import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy import ndimage, sparse
from scipy.sparse.linalg import splu
from skimage import measure

from .grid import StreamGrid, VorticityModel
from .quadrature import GridGeometry, extend_field, gradient4, lagrange4

SCHEMA_VERSION = 1
GEOMETRIES = ("rising_jet", "tube_bubble", "rectangle")
INFLOWS = ("quadratic", "uniform")
MANUFACTURED = ("smooth",)
ARMIJO = 1e-4
MAX_BACKTRACK = 40
ENERGY_BLOCKS = 8


class ConfigError(ValueError):
    """Invalid or unknown solver configuration."""


class SolverError(RuntimeError):
    """Energy increased beyond the line-search slack."""

    def __init__(self, message: str, diagnostics: dict):
        super().__init__(message)
        self.diagnostics = diagnostics


@dataclass(frozen=True)
class SolverConfig:
    geometry: str = "tube_bubble"
    x_min: float = 0.0
    x_max: float = 1.0
    y_min: float = -1.0
    y_max: float = 0.0
    nx: int = 128
    ny: int = 128
    flux: float = 0.3
    nozzle_radius: float = 0.5
    inflow: str = "quadratic"
    vorticity: VorticityModel = field(default_factory=VorticityModel)
    gravity: bool = True
    eps_h: float | None = None
    max_iter: int = 400
    tol: float = 1e-9
    manufactured: str | None = None
    schema_version: int = SCHEMA_VERSION

    def __post_init__(self):
        if self.schema_version != SCHEMA_VERSION:
            raise ConfigError(f"unsupported schema_version {self.schema_version}")
        if self.geometry not in GEOMETRIES:
            raise ConfigError(f"geometry must be one of {GEOMETRIES}, got {self.geometry!r}")
        if self.inflow not in INFLOWS:
            raise ConfigError(f"inflow must be one of {INFLOWS}")
        if not self.flux > 0:
            raise ConfigError("flux Q must be positive")
        if self.eps_h is not None and not self.eps_h > 0:
            raise ConfigError("eps_h must be positive")
        if not (self.x_max > self.x_min >= 0 and self.y_max > self.y_min):
            raise ConfigError("empty or misplaced domain rectangle")
        if self.x_min > 0 and self.geometry != "rectangle":
            raise ConfigError("only the rectangle geometry may leave the axis")
        if self.nx < 8 or self.ny < 8:
            raise ConfigError("need at least 8 cells per direction")
        if self.max_iter < 1 or not self.tol > 0:
            raise ConfigError("max_iter and tol must be positive")
        if self.geometry == "rising_jet" and not 0 < self.nozzle_radius < self.x_max:
            raise ConfigError("nozzle_radius must lie inside (0, x_max)")
        if self.manufactured is not None:
            if self.manufactured not in MANUFACTURED:
                raise ConfigError(f"manufactured must be one of {MANUFACTURED}")
            if self.geometry != "rectangle" or self.gravity or not self.vorticity.is_zero:
                raise ConfigError("manufactured runs need the rectangle geometry, "
                                  "gravity off and zero vorticity")

    @property
    def Q(self) -> float:
        return self.flux

    @property
    def eps(self) -> float:
        return 1e-3 * self.flux if self.eps_h is None else self.eps_h

    @property
    def dx(self) -> float:
        return (self.x_max - self.x_min) / self.nx

    @property
    def dy(self) -> float:
        return (self.y_max - self.y_min) / self.ny

    def nodes(self) -> tuple[np.ndarray, np.ndarray]:
        x = self.x_min + self.dx * np.arange(self.nx + 1)
        y = self.y_min + self.dy * np.arange(self.ny + 1)
        if self.x_min == 0:
            x[0] = 0.0
        return x, y

    def with_resolution(self, nx: int, ny: int | None = None) -> "SolverConfig":
        return dataclasses.replace(self, nx=nx, ny=nx if ny is None else ny)

    # JSON ----------------------------------------------------------------

    def to_dict(self) -> dict:
        d = {f.name: getattr(self, f.name) for f in dataclasses.fields(self)}
        d["vorticity"] = self.vorticity.to_dict()
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "SolverConfig":
        if not isinstance(d, dict):
            raise ConfigError("config must be a JSON object")
        names = {f.name for f in dataclasses.fields(cls)}
        extra = set(d) - names
        if extra:
            raise ConfigError(f"unknown config keys {sorted(extra)}")
        if "schema_version" not in d:
            raise ConfigError("config needs a schema_version")
        kw = dict(d)
        try:
            if "vorticity" in kw:
                kw["vorticity"] = VorticityModel.from_dict(kw["vorticity"])
            return cls(**kw)
        except (TypeError, ValueError) as exc:
            if isinstance(exc, ConfigError):
                raise
            raise ConfigError(str(exc)) from exc

    @classmethod
    def load(cls, path) -> "SolverConfig":
        try:
            data = json.loads(Path(path).read_text())
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: {exc}") from exc
        return cls.from_dict(data)

    def dumps(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)


def bundled_configs() -> dict[str, SolverConfig]:
    """The example configurations shipped with the package."""
    from importlib import resources

    out = {}
    for entry in sorted((resources.files("axisym_fbp") / "configs").iterdir(), key=lambda p: p.name):
        if entry.name.endswith(".json"):
            out[entry.name[:-5]] = SolverConfig.from_dict(json.loads(entry.read_text()))
    return out


# -- boundary data -------------------------------------------------------------


def inflow_profile(cfg: SolverConfig, xi):
    """Flux through the inlet disc of relative radius xi in [0, 1], scaled to Q.

    The quadratic profile has inlet velocity proportional to 1 - xi^2 / 2,
    positive up to the wall.
    """
    xi = np.clip(np.asarray(xi, dtype=float), 0.0, 1.0)
    if cfg.inflow == "uniform":
        return cfg.Q * xi**2
    return cfg.Q * (4.0 * xi**2 - xi**4) / 3.0


def manufactured_solution(cfg: SolverConfig):
    """(psi*, f*) with psi* = Q x^2 (2 + cos(k x) sin(m y + 0.3)) / x_max^2.

    psi* is positive off the axis and even in x apart from the factor x^2,
    so f* = -div((1/x) grad psi*) / x is smooth up to the axis.
    """
    k, m, ph = 0.5 * math.pi, math.pi, 0.3
    c = cfg.Q / cfg.x_max**2

    def psi(x, y):
        return c * x * x * (2.0 + np.cos(k * x) * np.sin(m * y + ph))

    def f(x, y):
        s = np.sin(m * y + ph)
        sinc = k * np.sinc(k * x / math.pi)  # sin(kx) / x
        return c * s * (3.0 * k * sinc + (k * k + m * m) * np.cos(k * x))

    return psi, f


def boundary_data(cfg: SolverConfig):
    """(values, fixed) on the node grid: Dirichlet values and their mask."""
    x, y = cfg.nodes()
    X, Y = np.meshgrid(x, y, indexing="ij")
    vals = np.zeros_like(X)
    fixed = np.zeros(X.shape, dtype=bool)
    Q = cfg.Q
    if cfg.geometry == "rectangle":
        if cfg.manufactured:
            psi, _ = manufactured_solution(cfg)
            vals = psi(X, Y)
        else:
            vals = Q * (X / cfg.x_max) ** 2
        fixed[0, :] = fixed[-1, :] = fixed[:, 0] = fixed[:, -1] = True
        vals = np.where(fixed, vals, 0.0)
    elif cfg.geometry == "tube_bubble":
        fixed[0, :] = True
        fixed[-1, :] = True
        vals[-1, :] = Q
        fixed[:, -1] = True
        vals[:, -1] = inflow_profile(cfg, x / cfg.x_max)
    else:
        b = cfg.nozzle_radius
        fixed[0, :] = True
        fixed[-1, :] = True
        vals[-1, :] = Q
        fixed[:, 0] = True
        vals[:, 0] = np.where(x < b, inflow_profile(cfg, x / b), Q)
    if cfg.x_min == 0:
        vals[0, :] = 0.0
    return vals, fixed


def initial_guess(cfg: SolverConfig) -> np.ndarray:
    vals, fixed = boundary_data(cfg)
    x, y = cfg.nodes()
    X, _ = np.meshgrid(x, y, indexing="ij")
    if cfg.geometry == "tube_bubble":
        guess = np.broadcast_to(inflow_profile(cfg, x / cfg.x_max)[:, None], X.shape)
    elif cfg.geometry == "rising_jet":
        guess = np.broadcast_to(vals[:, :1], X.shape)
    else:
        guess = cfg.Q * (X / cfg.x_max) ** 2
    return np.where(fixed, vals, guess).copy()


# -- energy --------------------------------------------------------------------


class Energy:
    """J and its gradient on the node grid of one configuration."""

    def __init__(self, cfg: SolverConfig, threads: int = 1):
        self.cfg = cfg
        self.threads = max(1, int(threads))
        x, y = cfg.nodes()
        dx, dy = cfg.dx, cfg.dy
        self.shape = (x.size, y.size)
        wy = np.full(y.size, dy)
        wy[[0, -1]] *= 0.5
        wx = np.full(x.size, dx)
        wx[[0, -1]] *= 0.5
        xm = 0.5 * (x[1:] + x[:-1])
        # (psi_{i+1,j} - psi_ij)^2 weights and (psi_{i,j+1} - psi_ij)^2 weights
        with np.errstate(divide="ignore"):
            inv_x = np.where(x > 0, 1.0 / np.where(x > 0, x, 1.0), 0.0)
        self.wex = (1.0 / (dx * xm))[:, None] * wy[None, :]
        self.wey = (wx * inv_x / dy)[:, None] * np.ones(y.size - 1)[None, :]
        self.xc = 0.5 * (x[1:] + x[:-1])
        self.yc = 0.5 * (y[1:] + y[:-1])
        self.cell_area = dx * dy
        self.node_area = wx[:, None] * wy[None, :]
        self.x, self.y = x, y
        if cfg.manufactured:
            _, fstar = manufactured_solution(cfg)
            XC, YC = np.meshgrid(self.xc, self.yc, indexing="ij")
            self.source = fstar(XC, YC)
        else:
            self.source = None
        self._A = None

    # pieces --------------------------------------------------------------

    @property
    def A(self) -> sparse.csr_matrix:
        """Symmetric matrix with psi^T A psi equal to the Dirichlet term."""
        if self._A is None:
            nx, ny = self.shape
            idx = np.arange(nx * ny).reshape(nx, ny)
            rows, cols, w = [], [], []
            for a, b, we in ((idx[:-1, :], idx[1:, :], self.wex), (idx[:, :-1], idx[:, 1:], self.wey)):
                a, b, we = a.ravel(), b.ravel(), we.ravel()
                rows += [a, b, a, b]
                cols += [a, b, b, a]
                w += [we, we, -we, -we]
            self._A = sparse.csr_matrix(
                (np.concatenate(w), (np.concatenate(rows), np.concatenate(cols))), shape=(nx * ny,) * 2)
        return self._A

    def _blocks(self):
        # the partition is independent of the thread count, so is the sum
        n = self.shape[0] - 1
        k = min(ENERGY_BLOCKS, n)
        edges = np.linspace(0, n, k + 1).astype(int)
        return [(edges[i], edges[i + 1]) for i in range(k)]

    def _block_energy(self, psi, lo, hi):
        p = psi[lo:hi + 1]
        ex = np.sum(self.wex[lo:hi] * np.diff(p, axis=0) ** 2)
        ey_hi = hi + 1 if hi == self.shape[0] - 1 else hi
        ey = np.sum(self.wey[lo:ey_hi] * np.diff(psi[lo:ey_hi], axis=1) ** 2)
        pc = 0.25 * (p[1:, 1:] + p[:-1, 1:] + p[1:, :-1] + p[:-1, :-1])
        xc = self.xc[lo:hi, None]
        cell = np.zeros_like(pc)
        if self.source is not None:
            cell -= 2.0 * xc * self.source[lo:hi] * pc
        elif not self.cfg.vorticity.is_zero:
            cell -= 2.0 * xc * self.cfg.vorticity.F(pc)
        if self.cfg.gravity:
            cell -= xc * self.yc[None, :] * np.clip(pc / self.cfg.eps, 0.0, 1.0)
        return float(ex + ey + np.sum(cell) * self.cell_area)

    def value(self, psi: np.ndarray) -> float:
        blocks = self._blocks()
        if self.threads == 1:
            parts = [self._block_energy(psi, *b) for b in blocks]
        else:
            with ThreadPoolExecutor(self.threads) as pool:
                parts = list(pool.map(lambda b: self._block_energy(psi, *b), blocks))
        return float(math.fsum(parts))

    def cell_derivative(self, psi: np.ndarray) -> np.ndarray:
        """dJ/dpsi_c per cell, with H' = 1/eps on [0, eps)."""
        pc = 0.25 * (psi[1:, 1:] + psi[:-1, 1:] + psi[1:, :-1] + psi[:-1, :-1])
        xc = self.xc[:, None]
        d = np.zeros_like(pc)
        if self.source is not None:
            d -= 2.0 * xc * self.source
        elif not self.cfg.vorticity.is_zero:
            d -= 2.0 * xc * self.cfg.vorticity.f(pc)
        if self.cfg.gravity:
            eps = self.cfg.eps
            band = (pc >= 0.0) & (pc < eps)
            d -= np.where(band, xc * self.yc[None, :] / eps, 0.0)
        return d * self.cell_area

    def gradient(self, psi: np.ndarray) -> np.ndarray:
        g = 2.0 * (self.A @ psi.ravel()).reshape(self.shape)
        d = 0.25 * self.cell_derivative(psi)
        g[1:, 1:] += d
        g[:-1, 1:] += d
        g[1:, :-1] += d
        g[:-1, :-1] += d
        return g


def assemble_energy(grid: StreamGrid, config: SolverConfig) -> float:
    """Discrete J of a grid laid out on the configuration's rectangle."""
    nx, ny = config.nx + 1, config.ny + 1
    if grid.shape != (nx, ny):
        raise ConfigError(f"grid shape {grid.shape} differs from the config's {(nx, ny)}")
    tol = 1e-9 * max(config.dx, config.dy)
    if (abs(grid.x_min - config.x_min) > tol or abs(grid.y_min - config.y_min) > tol
            or abs(grid.dx - config.dx) > tol or abs(grid.dy - config.dy) > tol):
        raise ConfigError("grid does not match the config rectangle")
    return Energy(config).value(grid.values)


# -- minimisation --------------------------------------------------------------


@dataclass
class SolveResult:
    grid: StreamGrid
    energy_history: list
    step_history: list
    iterations: int
    converged: bool
    flags: list = field(default_factory=list)
    diagnostics: dict = field(default_factory=dict)
    stages: list = field(default_factory=list)

    @property
    def monotone(self) -> bool:
        """Every stage's energy history is non-increasing."""
        hists = [s["energy_history"] for s in self.stages] or [self.energy_history]
        return all(bool(np.all(np.diff(h) <= 0.0)) for h in hists)

    def to_dict(self) -> dict:
        return {
            "iterations": self.iterations,
            "converged": self.converged,
            "final_energy": self.energy_history[-1] if self.energy_history else None,
            "energy_history": list(self.energy_history),
            "step_history": list(self.step_history),
            "flags": list(self.flags),
            "monotone": self.monotone,
            "stages": self.stages,
            "diagnostics": self.diagnostics,
        }


CONTINUATION_START = 0.1  # first band width, in units of Q
CONTINUATION_FACTOR = 10.0


def continuation_schedule(cfg: SolverConfig) -> list[float]:
    """Band widths eps_H for the successive stages, ending at the configured one.

    Descent on a band much thinner than one cell pins the front wherever it
    starts, so the front is first located with a wide band and then held
    while the band shrinks.
    """
    if not cfg.gravity:
        return [cfg.eps]
    out = []
    e = CONTINUATION_START * cfg.Q
    while e > cfg.eps * (1.0 + 1e-9):
        out.append(e)
        e /= CONTINUATION_FACTOR
    out.append(cfg.eps)
    return out


@dataclass
class _Stage:
    psi: np.ndarray
    history: list
    steps: list
    iterations: int
    converged: bool
    flags: list


def _descend(cfg: SolverConfig, psi: np.ndarray, fixed: np.ndarray, threads: int) -> _Stage:
    en = Energy(cfg, threads)
    A2 = (2.0 * en.A).tocsc()
    J = en.value(psi)
    history, steps, flags = [J], [], []
    slack = 1e-12 * max(1.0, abs(J))
    converged = False
    it = 0
    for it in range(1, cfg.max_iter + 1):
        g = en.gradient(psi)
        active = (psi <= 0.0) & (g > 0.0)
        fidx = np.flatnonzero((~fixed & ~active).ravel())
        d = np.zeros(psi.size)
        if fidx.size:
            sub = A2[fidx][:, fidx].tocsc()
            lu = splu(sub, permc_spec="MMD_AT_PLUS_A", options={"SymmetricMode": True})
            d[fidx] = -lu.solve(g.ravel()[fidx])
        d = d.reshape(psi.shape)
        step = float(np.max(np.abs(d))) / cfg.Q
        steps.append(step)
        if step < cfg.tol:
            converged = True
            it -= 1
            break
        t = 1.0
        for _ in range(MAX_BACKTRACK):
            trial = np.maximum(psi + t * d, 0.0)
            Jt = en.value(trial)
            if Jt <= J + ARMIJO * float(np.sum(g * (trial - psi))):
                break
            t *= 0.5
        else:
            flags.append(f"line search failed at iteration {it} (eps_H={cfg.eps:g})")
            it -= 1
            break
        if Jt > J + slack:
            raise SolverError("energy increased beyond line-search slack",
                              {"iteration": it, "eps_h": cfg.eps, "energy": J,
                               "trial_energy": Jt, "t": t})
        psi, J = trial, Jt
        history.append(J)
    else:
        flags.append(f"iteration cap {cfg.max_iter} reached (eps_H={cfg.eps:g})")
    return _Stage(psi, history, steps, it, converged, flags)


def minimize(config: SolverConfig, threads: int = 1, initial: np.ndarray | None = None) -> SolveResult:
    """Projected descent with a preconditioned direction and Armijo backtracking.

    Each iteration splits the non-Dirichlet nodes into an active set
    (psi = 0 with the gradient pushing downward) and a free set, solves
    with the Dirichlet-term Hessian restricted to the free set, and
    backtracks on psi <- max(psi + t d, 0). A stage stops once the full
    step moves psi by less than tol * Q in the max norm. With gravity on,
    the stages follow `continuation_schedule`, each warm-started from the
    last; `energy_history` is that of the final stage and every stage's
    history is kept in `stages`.
    """
    cfg = config
    vals, fixed = boundary_data(cfg)
    psi = initial_guess(cfg) if initial is None else np.where(fixed, vals, np.maximum(initial, 0.0))
    stages, flags = [], []
    for eps in continuation_schedule(cfg):
        st = _descend(dataclasses.replace(cfg, eps_h=eps), psi, fixed, threads)
        psi = st.psi
        flags += st.flags
        stages.append({"eps_h": eps, "iterations": st.iterations, "converged": st.converged,
                       "energy_history": st.history})
    grid = StreamGrid(psi, cfg.x_min, cfg.y_min, cfg.dx, cfg.dy)
    res = SolveResult(grid, st.history, st.steps, st.iterations, st.converged, flags, stages=stages)
    res.diagnostics = residual_report(res, cfg)
    return res


# -- diagnostics ---------------------------------------------------------------


def interior_residual(grid: StreamGrid, config: SolverConfig, delta: float | None = None) -> np.ndarray:
    """div((1/x) grad psi) + x f at nodes whose 3x3 neighbourhood has psi > delta."""
    en = Energy(config)
    psi = grid.values
    delta = 10.0 * config.eps if delta is None else delta
    lap = -(en.A @ psi.ravel()).reshape(psi.shape) / en.node_area
    X, Y = np.meshgrid(en.x, en.y, indexing="ij")
    if config.manufactured:
        _, fstar = manufactured_solution(config)
        src = X * fstar(X, Y)
    else:
        src = X * config.vorticity.f(psi)
    res = lap + src
    pos = psi > delta
    ok = np.zeros_like(pos)
    ok[1:-1, 1:-1] = pos[1:-1, 1:-1]
    for sx in (-1, 0, 1):
        for sy in (-1, 0, 1):
            ok[1:-1, 1:-1] &= pos[1 + sx:psi.shape[0] - 1 + sx, 1 + sy:psi.shape[1] - 1 + sy]
    return res[ok]


def free_boundary_level(config: SolverConfig) -> float:
    """Contour level that traces the edge of {psi > 0}.

    The eps_H level sits visibly inside the fluid wherever grad psi is small,
    as near the bubble nose, so a level well below eps_H is used instead.
    """
    return 1e-3 * config.eps


def free_boundary_points(grid: StreamGrid, level: float) -> list[np.ndarray]:
    """Contours psi = level in physical coordinates, longest first.

    Only vertices within two cells of an off-axis node with psi = 0 are
    kept. Elsewhere the level curve runs through the fluid, as it does next
    to the axis where psi ~ x^2 passes through every small level.
    """
    if not (grid.values.max() > level and grid.values.min() < level):
        return []
    dry = grid.values <= 0.0
    if grid.has_axis:
        dry[0] = False
    near = ndimage.binary_dilation(dry, np.ones((3, 3), dtype=bool), iterations=2)
    out = []
    for c in measure.find_contours(grid.values, level):
        ij = np.rint(c).astype(int)
        c = c[near[ij[:, 0], ij[:, 1]]]
        if len(c):
            out.append(np.column_stack([grid.x_min + grid.dx * c[:, 0], grid.y_min + grid.dy * c[:, 1]]))
    out.sort(key=len, reverse=True)
    return out


def bernoulli_mismatch(grid: StreamGrid, level: float, margin_cells: float = 4.0,
                       y_margin: float | None = None,
                       frozen_x: float | None = None) -> tuple[np.ndarray, np.ndarray]:
    """(points, |grad psi|^2 / x^2 + y) on the level curve away from the axis, y = 0 and the edges.

    The gradient comes from {psi >= level} extended across the curve, so
    the stencil sees neither the kink nor the quadratic profile inside the
    smoothing band. With level = eps_H this is where the penalized problem
    meets the Bernoulli condition. `frozen_x` replaces the weight x by a
    constant, which is the condition a Type 1 blow-up profile meets.
    """
    curves = free_boundary_points(grid, level)
    if not curves:
        return np.zeros((0, 2)), np.zeros(0)
    pts = np.concatenate(curves)
    h = max(grid.dx, grid.dy)
    m = margin_cells * h
    ym = m if y_margin is None else y_margin
    keep = ((pts[:, 0] > grid.x_min + m) & (pts[:, 0] < grid.x_max - m)
            & (pts[:, 1] > grid.y_min + m) & (pts[:, 1] < grid.y_max - m)
            & (np.abs(pts[:, 1]) > ym) & (pts[:, 0] > m))
    pts = pts[keep]
    if pts.size == 0:
        return pts, np.zeros(0)
    inside = grid.values >= level
    if grid.has_axis:
        inside[0] = inside[1]
    ext = np.nan_to_num(extend_field(grid.values, inside, 3), nan=0.0)
    if grid.has_axis:
        ext[0] = 0.0
    gx, gy = gradient4(ext, grid.dx, grid.dy)
    geom = GridGeometry.of(grid)
    gx = lagrange4(gx, geom, pts[:, 0], pts[:, 1])
    gy = lagrange4(gy, geom, pts[:, 0], pts[:, 1])
    w = pts[:, 0] if frozen_x is None else frozen_x
    mis = (gx * gx + gy * gy) / w**2 + pts[:, 1]
    return pts, mis


def residual_report(result: SolveResult, config: SolverConfig, frozen_x: float | None = None) -> dict:
    """Bernoulli mismatch on the free boundary and the interior PDE residual.

    The free boundary is located at `free_boundary_level`; the mismatch is
    sampled on the eps_H level curve. `free_boundary` is "none" without a
    boundary and "excluded" when every sample lies within the margins
    around the axis, y = 0 and the domain edges.
    """
    grid = result.grid
    out = {}
    pts, mis = bernoulli_mismatch(grid, config.eps, frozen_x=frozen_x)
    if not config.gravity and frozen_x is None:
        out["free_boundary"] = "not applicable (gravity off)"
        pts, mis = pts[:0], mis[:0]
    elif not free_boundary_points(grid, free_boundary_level(config)):
        out["free_boundary"] = "none"
    else:
        out["free_boundary"] = "found" if mis.size else "excluded"
    if mis.size:
        rel = mis / np.maximum(-pts[:, 1], 1e-300)
        out["bernoulli"] = {
            "samples": int(mis.size),
            "median_abs": float(np.median(np.abs(mis))),
            "max_abs": float(np.max(np.abs(mis))),
            "rms": float(np.sqrt(np.mean(mis**2))),
            "median_rel": float(np.median(np.abs(rel))),
        }
    else:
        out["bernoulli"] = None
    res = interior_residual(grid, config)
    out["interior"] = None if res.size == 0 else {
        "nodes": int(res.size),
        "max_abs": float(np.max(np.abs(res))),
        "rms": float(np.sqrt(np.mean(res**2))),
    }
    return out


def free_boundary_distance(a: StreamGrid, b: StreamGrid, level: float) -> float:
    """Symmetric Hausdorff distance between the level curves of two grids."""
    from scipy.spatial import cKDTree

    ca, cb = free_boundary_points(a, level), free_boundary_points(b, level)
    if not ca or not cb:
        return math.inf
    pa, pb = np.concatenate(ca), np.concatenate(cb)
    da, _ = cKDTree(pb).query(pa)
    db, _ = cKDTree(pa).query(pb)
    return float(max(da.max(), db.max()))
