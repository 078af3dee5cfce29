"""Stream-function grids, vorticity models, degenerate points and grid I/O.

Arrays are indexed [ix, iy] with x_i = x_min + i dx and y_j = y_min + j dy.
The FBG1 binary layout is row-major with x fastest, which is the
Fortran-order ravel of such an array.
"""

from __future__ import annotations

import enum
import io
import math
import re
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np


class GridFormatError(ValueError):
    """Malformed grid file."""


@dataclass
class StreamGrid:
    """Discretised psi >= 0 on a rectangle of the half-plane x >= 0.

    `mask` optionally overrides the positivity set. A boolean mask marks
    fluid nodes; a float mask is read as a level function that is positive
    in the fluid, so sub-cell boundary positions can be prescribed.
    """

    values: np.ndarray
    x_min: float
    y_min: float
    dx: float
    dy: float
    mask: np.ndarray | None = None

    def __post_init__(self):
        self.values = np.ascontiguousarray(self.values, dtype=float)
        self.x_min, self.y_min = float(self.x_min), float(self.y_min)
        self.dx, self.dy = float(self.dx), float(self.dy)
        if self.values.ndim != 2:
            raise ValueError("values must be a 2-D array")
        nx, ny = self.values.shape
        if nx < 8 or ny < 8:
            raise ValueError(f"grid must be at least 8x8, got {nx}x{ny}")
        if not (self.dx > 0 and self.dy > 0):
            raise ValueError("spacing must be positive")
        if self.x_min < -1e-12 * self.dx:
            raise ValueError("grid must lie in the half-plane x >= 0")
        if not np.all(np.isfinite(self.values)):
            raise ValueError("values must be finite")
        if np.any(self.values < 0):
            raise ValueError("stream function values must be non-negative")
        if self.has_axis and np.any(self.values[0] != 0.0):
            raise ValueError("values on the axis x = 0 must vanish")
        if self.mask is not None:
            m = np.asarray(self.mask)
            if m.shape != self.values.shape:
                raise ValueError("mask shape differs from values")
            self.mask = m.astype(bool) if m.dtype == bool else m.astype(float)

    @property
    def nx(self) -> int:
        return self.values.shape[0]

    @property
    def ny(self) -> int:
        return self.values.shape[1]

    @property
    def shape(self) -> tuple[int, int]:
        return self.values.shape

    @property
    def has_axis(self) -> bool:
        return abs(self.x_min) <= 1e-12 * self.dx

    @property
    def x(self) -> np.ndarray:
        x = self.x_min + self.dx * np.arange(self.nx)
        if self.has_axis:
            x[0] = 0.0
        return x

    @property
    def y(self) -> np.ndarray:
        return self.y_min + self.dy * np.arange(self.ny)

    @property
    def x_max(self) -> float:
        return self.x_min + self.dx * (self.nx - 1)

    @property
    def y_max(self) -> float:
        return self.y_min + self.dy * (self.ny - 1)

    def mesh(self) -> tuple[np.ndarray, np.ndarray]:
        return np.meshgrid(self.x, self.y, indexing="ij")

    @property
    def eps_mask(self) -> float:
        vmax = float(self.values.max())
        return 1e-12 * vmax

    def positivity(self) -> np.ndarray:
        """Boolean fluid indicator at the nodes."""
        if self.mask is not None:
            return self.mask if self.mask.dtype == bool else self.mask > 0
        return self.values > self.eps_mask

    @classmethod
    def from_function(cls, fn, x_range, y_range, shape, mask_fn=None) -> "StreamGrid":
        nx, ny = shape
        x = np.linspace(x_range[0], x_range[1], nx)
        y = np.linspace(y_range[0], y_range[1], ny)
        X, Y = np.meshgrid(x, y, indexing="ij")
        vals = np.maximum(np.asarray(fn(X, Y), dtype=float), 0.0)
        if abs(x_range[0]) < 1e-15:
            vals[0] = 0.0
        mask = None if mask_fn is None else mask_fn(X, Y)
        return cls(vals, float(x[0]), float(y[0]), float(x[1] - x[0]), float(y[1] - y[0]), mask)


# -- vorticity ---------------------------------------------------------------


@dataclass(frozen=True)
class VorticityModel:
    """f(psi) with primitive F, F(0) = 0.

    kinds: "zero", "constant" (f = lam), "linear" (f = lam psi) and
    "tabulated" (piecewise-linear f through (table_psi, table_f), held
    constant beyond the last node).
    """

    kind: str = "zero"
    lam: float = 0.0
    table_psi: tuple = ()
    table_f: tuple = ()

    def __post_init__(self):
        if self.kind not in ("zero", "constant", "linear", "tabulated"):
            raise ValueError(f"unknown vorticity kind {self.kind!r}")
        if self.kind == "tabulated":
            tp = np.asarray(self.table_psi, dtype=float)
            if tp.size < 2 or tp[0] != 0.0 or np.any(np.diff(tp) <= 0):
                raise ValueError("table_psi must start at 0 and increase")
            if len(self.table_f) != tp.size:
                raise ValueError("table_f length differs from table_psi")

    @classmethod
    def parse(cls, text: str) -> "VorticityModel":
        """'zero', 'constant:LAM' or 'linear:LAM'."""
        if text == "zero":
            return cls()
        kind, _, val = text.partition(":")
        if kind in ("constant", "linear") and val:
            return cls(kind, float(val))
        raise ValueError(f"cannot parse vorticity {text!r}")

    def to_dict(self) -> dict:
        d = {"kind": self.kind}
        if self.kind in ("constant", "linear"):
            d["lam"] = self.lam
        if self.kind == "tabulated":
            d["table_psi"] = list(self.table_psi)
            d["table_f"] = list(self.table_f)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "VorticityModel":
        allowed = {"kind", "lam", "table_psi", "table_f"}
        extra = set(d) - allowed
        if extra:
            raise ValueError(f"unknown vorticity keys {sorted(extra)}")
        return cls(
            d.get("kind", "zero"),
            float(d.get("lam", 0.0)),
            tuple(d.get("table_psi", ())),
            tuple(d.get("table_f", ())),
        )

    @property
    def is_zero(self) -> bool:
        return self.kind == "zero" or (self.kind in ("constant", "linear") and self.lam == 0.0)

    def f(self, psi):
        psi = np.asarray(psi, dtype=float)
        if self.kind == "zero":
            return np.zeros_like(psi)
        if self.kind == "constant":
            return np.full_like(psi, self.lam)
        if self.kind == "linear":
            return self.lam * psi
        tp = np.asarray(self.table_psi, dtype=float)
        tf = np.asarray(self.table_f, dtype=float)
        return np.interp(psi, tp, tf)

    def F(self, psi):
        psi = np.asarray(psi, dtype=float)
        if self.kind == "zero":
            return np.zeros_like(psi)
        if self.kind == "constant":
            return self.lam * psi
        if self.kind == "linear":
            return 0.5 * self.lam * psi * psi
        # exact primitive of the piecewise-linear interpolant
        tp = np.asarray(self.table_psi, dtype=float)
        tf = np.asarray(self.table_f, dtype=float)
        cum = np.concatenate([[0.0], np.cumsum(0.5 * (tf[1:] + tf[:-1]) * np.diff(tp))])
        k = np.clip(np.searchsorted(tp, psi, side="right") - 1, 0, tp.size - 2)
        d = np.clip(psi - tp[k], 0.0, tp[k + 1] - tp[k])
        slope = (tf[k + 1] - tf[k]) / (tp[k + 1] - tp[k])
        inner = cum[k] + tf[k] * d + 0.5 * slope * d * d
        below = tf[0] * np.minimum(psi, 0.0)
        above = tf[-1] * np.maximum(psi - tp[-1], 0.0)
        return inner + below + above


# -- degenerate points -------------------------------------------------------


class PointKind(str, enum.Enum):
    TYPE1 = "Type1"
    TYPE2 = "Type2"
    TYPE3 = "Type3"


_KAPPA = {PointKind.TYPE1: 1.5, PointKind.TYPE2: 2.0, PointKind.TYPE3: 2.5}


@dataclass(frozen=True)
class DegeneratePoint:
    kind: PointKind
    x: float = 0.0
    y: float = 0.0

    def __post_init__(self):
        if self.kind is PointKind.TYPE1 and not (self.x > 0 and self.y == 0):
            raise ValueError("a Type 1 point sits at (x0, 0) with x0 > 0")
        if self.kind is PointKind.TYPE2 and not (self.x == 0 and self.y < 0):
            raise ValueError("a Type 2 point sits at (0, y0) with y0 < 0")
        if self.kind is PointKind.TYPE3 and not (self.x == 0 and self.y == 0):
            raise ValueError("a Type 3 point is the origin")

    @classmethod
    def type1(cls, x0: float) -> "DegeneratePoint":
        return cls(PointKind.TYPE1, float(x0), 0.0)

    @classmethod
    def type2(cls, y0: float) -> "DegeneratePoint":
        return cls(PointKind.TYPE2, 0.0, float(y0))

    @classmethod
    def origin(cls) -> "DegeneratePoint":
        return cls(PointKind.TYPE3)

    @classmethod
    def parse(cls, text: str) -> "DegeneratePoint":
        """'type1:x0=1', 'type2:y0=-1', 'origin' or 'type3'."""
        t = text.strip().lower()
        if t in ("origin", "type3"):
            return cls.origin()
        m = re.fullmatch(r"type([12]):([xy]0)=(\S+)", t)
        if not m:
            raise ValueError(f"cannot parse point {text!r}")
        val = float(m.group(3))
        if m.group(1) == "1" and m.group(2) == "x0":
            return cls.type1(val)
        if m.group(1) == "2" and m.group(2) == "y0":
            return cls.type2(val)
        raise ValueError(f"cannot parse point {text!r}")

    @property
    def kappa(self) -> float:
        return _KAPPA[self.kind]

    @property
    def location(self) -> tuple[float, float]:
        return self.x, self.y

    @property
    def on_axis(self) -> bool:
        return self.kind is not PointKind.TYPE1

    def label(self) -> str:
        if self.kind is PointKind.TYPE1:
            return f"type1:x0={self.x!r}"
        if self.kind is PointKind.TYPE2:
            return f"type2:y0={self.y!r}"
        return "origin"

    def to_dict(self) -> dict:
        return {"kind": self.kind.value, "x": self.x, "y": self.y, "kappa": self.kappa}


# -- I/O ---------------------------------------------------------------------

MAGIC = b"FBG1"


def write_fbg(path, grid: StreamGrid) -> None:
    header = (
        f"FBG1\n{grid.nx} {grid.ny}\n"
        f"{grid.x_min!r} {grid.y_min!r} {grid.dx!r} {grid.dy!r}\n"
    ).encode("ascii")
    body = np.asarray(grid.values, dtype="<f8").ravel(order="F").tobytes()
    Path(path).write_bytes(header + body)


def read_fbg(path) -> StreamGrid:
    raw = Path(path).read_bytes()
    buf = io.BytesIO(raw)
    try:
        magic = buf.readline().rstrip(b"\r\n")
        if magic != MAGIC:
            raise GridFormatError(f"bad magic {magic[:16]!r}")
        nx, ny = (int(v) for v in buf.readline().split())
        x_min, y_min, dx, dy = (float(v) for v in buf.readline().split())
    except (ValueError, UnicodeDecodeError) as exc:
        if isinstance(exc, GridFormatError):
            raise
        raise GridFormatError(f"malformed FBG1 header: {exc}") from exc
    body = raw[buf.tell():]
    if nx <= 0 or ny <= 0 or len(body) != 8 * nx * ny:
        raise GridFormatError(f"expected {8 * nx * ny} payload bytes, found {len(body)}")
    vals = np.frombuffer(body, dtype="<f8").reshape((nx, ny), order="F").astype(float)
    try:
        return StreamGrid(vals, x_min, y_min, dx, dy)
    except ValueError as exc:
        raise GridFormatError(str(exc)) from exc


def write_grid_csv(path, grid: StreamGrid) -> None:
    """Long-format CSV x,y,psi with x varying fastest."""
    X, Y = grid.mesh()
    data = np.column_stack([X.ravel(order="F"), Y.ravel(order="F"), grid.values.ravel(order="F")])
    with open(path, "w", newline="") as fh:
        fh.write("x,y,psi\n")
        for x, y, v in data.tolist():
            fh.write(f"{x!r},{y!r},{v!r}\n")


def read_grid_csv(path) -> StreamGrid:
    try:
        data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    except ValueError as exc:
        raise GridFormatError(f"malformed grid CSV: {exc}") from exc
    if data.shape[1] != 3:
        raise GridFormatError("grid CSV needs columns x,y,psi")
    xs = np.unique(data[:, 0])
    ys = np.unique(data[:, 1])
    nx, ny = xs.size, ys.size
    if nx * ny != data.shape[0]:
        raise GridFormatError("grid CSV is not a full tensor grid")
    ix = np.searchsorted(xs, data[:, 0])
    iy = np.searchsorted(ys, data[:, 1])
    vals = np.zeros((nx, ny))
    vals[ix, iy] = data[:, 2]
    dx = (xs[-1] - xs[0]) / (nx - 1)
    dy = (ys[-1] - ys[0]) / (ny - 1)
    try:
        return StreamGrid(vals, float(xs[0]), float(ys[0]), float(dx), float(dy))
    except ValueError as exc:
        raise GridFormatError(str(exc)) from exc


def read_grid(path) -> StreamGrid:
    p = Path(path)
    with open(p, "rb") as fh:
        head = fh.read(4)
    if head == MAGIC:
        return read_fbg(p)
    if p.suffix.lower() == ".csv":
        return read_grid_csv(p)
    raise GridFormatError(f"{p} is neither FBG1 nor CSV")
