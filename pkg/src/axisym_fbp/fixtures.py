"""Synthetic truth grids for every constructible row of the classification table.

Profile rows sample a closed-form blow-up limit. The remaining rows have
psi = 0 and carry the fluid region as a float level mask (positive in the
fluid), so the indicator term sees the exact sub-cell boundary.

Perturbations add a term of relative size `eps` and homogeneity
kappa + 1/2 about the point: psi0 (1 + eps rho^(1/2)) for profile rows and
eps S rho^(kappa - 1/2) max(level, 0) for mask rows, where S is the profile
scale of the point type and every level is Lipschitz with slope one. At
axis points the mask term becomes eps S x^2 rho^(kappa - 5/2) max(level, 0)
so that psi keeps its O(x^2) behaviour at the axis.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .grid import DegeneratePoint, PointKind, StreamGrid
from .profiles import BlowupProfile

CUSP_WIDTH = 1.0  # c in |y| < c d^(3/2)
AXIS_CUSP_WIDTH = 4.0  # wider, so the fluid tongue clears the axis column within a few cells


@dataclass(frozen=True)
class TableRow:
    key: str
    point: DegeneratePoint
    label: str
    menu: str
    profile: BlowupProfile | None = None
    level: Callable | None = None

    @property
    def is_profile(self) -> bool:
        return self.profile is not None

    def window(self) -> tuple[tuple[float, float], tuple[float, float]]:
        """Unit-height window around the point; axis points get x in [0, 1/2]."""
        cx, cy = self.point.location
        if self.point.kind is PointKind.TYPE1:
            return (cx - 0.5, cx + 0.5), (cy - 0.5, cy + 0.5)
        return (0.0, 0.5), (cy - 0.5, cy + 0.5)

    def grid(self, n: int = 512, eps: float = 0.0) -> StreamGrid:
        """Grid with n cells per unit length."""
        (xa, xb), (ya, yb) = self.window()
        shape = (int(round((xb - xa) * n)) + 1, int(round((yb - ya) * n)) + 1)
        cx, cy = self.point.location
        k = self.point.kappa

        def rho(x, y):
            return np.hypot(x - cx, y - cy)

        if self.profile is not None:
            prof = self.profile

            def fn(x, y):
                return prof.values(x, y) * (1.0 + eps * np.sqrt(rho(x, y)))

            return StreamGrid.from_function(fn, (xa, xb), (ya, yb), shape)

        level = self.level
        scale = profile_scale(self.point)

        if self.point.kind is PointKind.TYPE1:
            def fn(x, y):
                return eps * scale * rho(x, y) ** (k - 0.5) * np.maximum(level(x, y), 0.0)
        else:
            def fn(x, y):
                with np.errstate(divide="ignore", invalid="ignore"):
                    w = np.where(rho(x, y) > 0, x * x * rho(x, y) ** (k - 2.5), 0.0)
                return eps * scale * w * np.maximum(level(x, y), 0.0)

        return StreamGrid.from_function(fn, (xa, xb), (ya, yb), shape, mask_fn=level)


def profile_scale(point: DegeneratePoint) -> float:
    if point.kind is PointKind.TYPE1:
        return point.x
    if point.kind is PointKind.TYPE2:
        return 1.0
    return BlowupProfile.garabedian().C0


def _type1_rows(x0: float) -> list[TableRow]:
    p = DegeneratePoint.type1(x0)
    c = CUSP_WIDTH

    def cusp(x, y):
        s = x - x0
        return c * np.maximum(s, 0.0) ** 1.5 - np.abs(y) - np.maximum(-s, 0.0)

    return [
        TableRow("type1-stokes", p, "Stokes corner", "StokesCorner", profile=BlowupProfile.stokes(x0)),
        TableRow("type1-flat-upper", p, "horizontal flatness", "FlatUpper", level=lambda x, y: y),
        TableRow("type1-flat-lower", p, "horizontal flatness", "FlatLower", level=lambda x, y: -y),
        TableRow("type1-null-cusp", p, "horizontal cusp", "Null", level=cusp),
    ]


def _type2_rows(y0: float) -> list[TableRow]:
    p = DegeneratePoint.type2(y0)
    c = AXIS_CUSP_WIDTH

    def cusp(x, y):
        s = y0 - y
        return c * np.maximum(s, 0.0) ** 1.5 - x - np.maximum(-s, 0.0)

    return [
        TableRow("type2-axis-profile", p, "vertical cusp", "FullHalfDisk",
                 profile=BlowupProfile.axis(C=1.0, y0=y0)),
        TableRow("type2-full-mask", p, "vertical cusp", "FullHalfDisk", level=lambda x, y: x),
        TableRow("type2-null-cusp", p, "cusp", "Null", level=cusp),
    ]


def _type3_rows() -> list[TableRow]:
    p = DegeneratePoint.origin()
    c = CUSP_WIDTH
    return [
        TableRow("type3-bubble", p, "Garabedian pointed bubble", "Bubble",
                 profile=BlowupProfile.garabedian()),
        TableRow("type3-flat-upper", p, "horizontal flatness", "FlatUpper", level=lambda x, y: y),
        TableRow("type3-flat-lower", p, "horizontal flatness", "FlatLower", level=lambda x, y: -y),
        TableRow("type3-null-cusp", p, "horizontal cusp", "Null",
                 level=lambda x, y: c * np.maximum(x, 0.0) ** 1.5 - np.abs(y)),
    ]


def table_rows(x0: float = 1.0, y0: float = -1.0) -> list[TableRow]:
    """All eleven rows: four for Type 1, three for Type 2, four for Type 3."""
    return _type1_rows(x0) + _type2_rows(y0) + _type3_rows()


def row(key: str, **kw) -> TableRow:
    for r in table_rows(**kw):
        if r.key == key:
            return r
    raise KeyError(key)


def zero_grid(n: int = 64) -> StreamGrid:
    """psi = 0 on [0, 1] x [-1, 0]."""
    return StreamGrid.from_function(lambda x, y: 0.0 * x, (0.0, 1.0), (-1.0, 0.0), (n + 1, n + 1))
