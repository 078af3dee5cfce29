"""Cut-cell quadrature on uniform grids for disks and level-set regions.

Volume rule: cells fully inside the disk and the fluid use the midpoint
rule; cells cut by the circle use the exact area and centroid of the
rectangle-disk intersection; cells cut by the free boundary are split into
two triangles on which the level field is linear and clipped exactly; the
few cells cut by both are sub-sampled. Cut cells are first halved twice,
and fields are interpolated bicubically at their points.

Arc rule: trapezoid in the polar angle with 4x4 Lagrange interpolation of
node fields. Intervals crossed by the free boundary are split at the
crossing so the integrand's jump does not cost an order of accuracy.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import ndimage


# -- level-set extension -----------------------------------------------------


_EXTRAP = {4: (4.0, -6.0, 4.0, -1.0), 3: (3.0, -3.0, 1.0), 2: (2.0, -1.0), 1: (1.0,)}


def extend_field(values: np.ndarray, inside: np.ndarray, layers: int = 3) -> np.ndarray:
    """Extrapolate `values` from `inside` nodes outward by `layers` rings.

    Each new node takes the mean of the highest-order polynomial
    extrapolations (cubic down to constant) available along the four axis
    directions. Nodes beyond the band are NaN.
    """
    ext = np.where(inside, values, np.nan)
    known = inside.copy()
    nx, ny = values.shape
    cross = ndimage.generate_binary_structure(2, 1)
    for _ in range(layers):
        front = ndimage.binary_dilation(known, cross) & ~known
        if not front.any():
            break
        fi, fj = np.nonzero(front)
        acc = {o: np.zeros(fi.size) for o in _EXTRAP}
        cnt = {o: np.zeros(fi.size) for o in _EXTRAP}
        for di, dj in ((1, 0), (-1, 0), (0, 1), (0, -1)):
            run = np.zeros(fi.size, dtype=int)
            alive = np.ones(fi.size, dtype=bool)
            e = []
            for s in range(1, 5):
                i, j = fi + s * di, fj + s * dj
                ok = (i >= 0) & (i < nx) & (j >= 0) & (j < ny)
                ic, jc = np.clip(i, 0, nx - 1), np.clip(j, 0, ny - 1)
                alive &= ok & known[ic, jc]
                run += alive
                e.append(np.where(alive, ext[ic, jc], 0.0))
            for o, c in _EXTRAP.items():
                sel = run == o
                acc[o] += np.where(sel, sum(ci * ei for ci, ei in zip(c, e)), 0.0)
                cnt[o] += sel
        val = np.full(fi.size, np.nan)
        for o in sorted(_EXTRAP):
            have = cnt[o] > 0
            val = np.where(have, acc[o] / np.maximum(cnt[o], 1), val)
        ext[fi, fj] = val
        known[fi, fj] = True
    return ext


def gradient4(u: np.ndarray, dx: float, dy: float) -> tuple[np.ndarray, np.ndarray]:
    """Fourth-order central differences, second-order one-sided at the edges."""
    out = []
    for axis, h in ((0, dx), (1, dy)):
        g = np.gradient(u, h, axis=axis, edge_order=2)
        n = u.shape[axis]
        if n >= 5:
            def m(a, b):
                return tuple(slice(a, b) if k == axis else slice(None) for k in range(2))
            g[m(2, n - 2)] = (u[m(0, n - 4)] - 8 * u[m(1, n - 3)] + 8 * u[m(3, n - 1)] - u[m(4, n)]) / (12 * h)
        out.append(g)
    return out[0], out[1]


# -- exact rectangle / disk geometry ----------------------------------------


def _corner_moments(u, v, R):
    """Signed area and first moments of the disk part of [0,u] x [0,v].

    Disk of radius R centred at the origin. Area is odd in u and v, the
    x-moment is even in u and odd in v, the y-moment odd in u, even in v.
    """
    su, sv = np.sign(u), np.sign(v)
    a = np.minimum(np.abs(u), R)
    b = np.minimum(np.abs(v), R)
    xc = np.sqrt(np.maximum(R * R - b * b, 0.0))
    m = np.minimum(a, xc)

    def S(t):
        return 0.5 * (t * np.sqrt(np.maximum(R * R - t * t, 0.0)) + R * R * np.arcsin(np.clip(t / R, -1, 1)))

    area = b * m + S(a) - S(m)
    mx = 0.5 * b * m * m + (np.maximum(R * R - m * m, 0.0) ** 1.5 - np.maximum(R * R - a * a, 0.0) ** 1.5) / 3.0
    my = 0.5 * b * b * m + 0.5 * (R * R * (a - m) - (a**3 - m**3) / 3.0)
    return su * sv * area, sv * mx, su * my


def rect_disk_moments(ax, bx, ay, by, R):
    """Area and first moments of [ax,bx] x [ay,by] intersected with the disk."""
    out = []
    for k in range(3):
        f = lambda u, v: _corner_moments(u, v, R)[k]  # noqa: E731
        out.append(f(bx, by) - f(ax, by) - f(bx, ay) + f(ax, ay))
    return out


# -- triangle clipping ---------------------------------------------------------


def _clip_triangles(p, v):
    """Positive part of linear functions on triangles.

    p: (n, 3, 2) vertex coordinates, v: (n, 3) vertex values. Returns
    (area, cx, cy) of {v > 0} for each triangle.
    """
    e1 = p[:, 1] - p[:, 0]
    e2 = p[:, 2] - p[:, 0]
    A = 0.5 * np.abs(e1[:, 0] * e2[:, 1] - e1[:, 1] * e2[:, 0])
    cfull = p.mean(axis=1)
    pos = v > 0
    npos = pos.sum(axis=1)
    area = np.where(npos == 3, A, 0.0)
    cen = np.where((npos == 3)[:, None], cfull, 0.0)
    for want, odd_is_pos in ((1, True), (2, False)):
        sel = npos == want
        if not sel.any():
            continue
        ps, vs, As, cf = p[sel], v[sel], A[sel], cfull[sel]
        odd_mask = pos[sel] if odd_is_pos else ~pos[sel]
        io = np.argmax(odd_mask, axis=1)
        i1 = (io + 1) % 3
        i2 = (io + 2) % 3
        r = np.arange(ps.shape[0])
        po, p1, p2 = ps[r, io], ps[r, i1], ps[r, i2]
        vo, v1, v2 = vs[r, io], vs[r, i1], vs[r, i2]
        t1 = vo / (vo - v1)
        t2 = vo / (vo - v2)
        a = po + t1[:, None] * (p1 - po)
        b = po + t2[:, None] * (p2 - po)
        small = t1 * t2 * As
        csmall = (po + a + b) / 3.0
        if odd_is_pos:
            ar, c = small, csmall
        else:
            ar = As - small
            c = (As[:, None] * cf - small[:, None] * csmall) / np.maximum(ar, 1e-300)[:, None]
        area[sel] = ar
        cen[sel] = c
    return area, cen[:, 0], cen[:, 1]


# -- ball rule -----------------------------------------------------------------


@dataclass
class GridGeometry:
    x_min: float
    y_min: float
    dx: float
    dy: float
    nx: int
    ny: int

    @classmethod
    def of(cls, grid) -> "GridGeometry":
        return cls(grid.x_min, grid.y_min, grid.dx, grid.dy, grid.nx, grid.ny)


@dataclass
class BallRule:
    """Quadrature for the disk part of the grid, optionally cut by a level set.

    Cell-centre part: `wc[a, b]` weights the centre of cell (i0 + a, j0 + b).
    Scattered part: points (px, py) with weights `w`, covering the cut cells.
    """

    geom: GridGeometry
    i0: int
    j0: int
    wc: np.ndarray
    px: np.ndarray
    py: np.ndarray
    w: np.ndarray

    @property
    def node_slices(self):
        ni, nj = self.wc.shape
        return slice(self.i0, self.i0 + ni + 1), slice(self.j0, self.j0 + nj + 1)

    def centre_coords(self):
        g = self.geom
        ni, nj = self.wc.shape
        xc = g.x_min + (self.i0 + 0.5 + np.arange(ni)) * g.dx
        yc = g.y_min + (self.j0 + 0.5 + np.arange(nj)) * g.dy
        return np.meshgrid(xc, yc, indexing="ij")

    def centre_values(self, node: np.ndarray) -> np.ndarray:
        si, sj = self.node_slices
        b = node[si, sj]
        return 0.25 * (b[:-1, :-1] + b[1:, :-1] + b[:-1, 1:] + b[1:, 1:])

    def point_values(self, node: np.ndarray) -> np.ndarray:
        return lagrange4(node, self.geom, self.px, self.py)

    @property
    def total_weight(self) -> float:
        return float(self.wc.sum() + self.w.sum())

    def integrate(self, integrand, fields: dict[str, np.ndarray]) -> float:
        """Sum of integrand(x, y, **fields) times weights.

        Interior cells integrate the bicubic through the integrand's node
        values (fourth order); scattered points use bicubic interpolation of
        the fields so that cut cells, whose layout changes with the radius,
        do not inject O(h^2) noise.
        """
        total = 0.0
        if np.any(self.wc > 0):
            total += float(np.sum(self._cell_integrals(integrand, fields) * self.wc))
        if self.w.size:
            pf = {k: self.point_values(v) for k, v in fields.items()}
            val = integrand(self.px, self.py, **pf)
            total += float(np.sum(np.asarray(val) * self.w))
        return total

    def _cell_integrals(self, integrand, fields):
        """Cell means of the integrand from 4-point stencils per direction."""
        g = self.geom
        ni, nj = self.wc.shape
        (ilo, Wx), (jlo, Wy) = _cell_stencil(self.i0, ni, g.nx), _cell_stencil(self.j0, nj, g.ny)
        si = slice(ilo, ilo + Wx.shape[1])
        sj = slice(jlo, jlo + Wy.shape[1])
        x = g.x_min + np.arange(si.start, si.stop) * g.dx
        y = g.y_min + np.arange(sj.start, sj.stop) * g.dy
        X, Y = np.meshgrid(x, y, indexing="ij")
        on_axis = x <= 0.0
        with np.errstate(divide="ignore", invalid="ignore"):
            F = np.asarray(integrand(X, Y, **{k: v[si, sj] for k, v in fields.items()}), float)
        F = np.broadcast_to(F, X.shape).copy()
        if on_axis.any():
            # 0/0 limits on the axis: cubic extrapolation from the first interior columns
            k = int(np.nonzero(on_axis)[0].max())
            F[k] = 4 * F[k + 1] - 6 * F[k + 2] + 4 * F[k + 3] - F[k + 4]
        return Wx @ F @ Wy.T


_W_MID = np.array([-1.0, 13.0, 13.0, -1.0]) / 24.0
_W_LEFT = np.array([9.0, 19.0, -5.0, 1.0]) / 24.0


def _cell_stencil(c0: int, n: int, nodes: int):
    """Node offset and (n, m) matrix mapping node values to cell means.

    Cell c0 + a spans nodes c0 + a and c0 + a + 1; the cubic through four
    neighbouring nodes is integrated, shifted one-sided at the grid edges.
    """
    lo = max(c0 - 1, 0)
    hi = min(c0 + n + 1, nodes - 1)
    W = np.zeros((n, hi - lo + 1))
    for a in range(n):
        c = c0 + a
        if c - 1 < 0:
            W[a, c - lo:c - lo + 4] = _W_LEFT
        elif c + 2 > nodes - 1:
            W[a, c - 2 - lo:c + 2 - lo] = _W_LEFT[::-1]
        else:
            W[a, c - 1 - lo:c + 3 - lo] = _W_MID
    return lo, W


def _classify(AX, AY, hx, hy, r):
    BX, BY = AX + hx, AY + hy
    near = np.hypot(np.clip(0.0, AX, BX), np.clip(0.0, AY, BY))
    far = np.hypot(np.maximum(np.abs(AX), np.abs(BX)), np.maximum(np.abs(AY), np.abs(BY)))
    full = far <= r
    return full, (near < r) & ~full


def _cut_cells(AX, AY, hx, hy, L, r, depth, subsample):
    """Points and weights for rectangles [AX, AX+hx] x [AY, AY+hy] (disk-centred).

    L holds the corner levels (00, 10, 01, 11) per rectangle or is None.
    Cut rectangles are halved `depth` times before the exact rules apply.
    """
    d_full, d_cut = _classify(AX, AY, hx, hy, r)
    if L is None:
        l_in = np.ones(AX.shape, dtype=bool)
        l_cut = np.zeros(AX.shape, dtype=bool)
    else:
        npos = (L > 0).sum(axis=1)
        l_in, l_cut = npos == 4, (npos > 0) & (npos < 4)
    xs, ys, ws = [], [], []

    sel = d_full & l_in
    xs.append(AX[sel] + 0.5 * hx)
    ys.append(AY[sel] + 0.5 * hy)
    ws.append(np.full(int(sel.sum()), hx * hy))

    if depth > 0:
        sel = (d_full & l_cut) | (d_cut & (l_in | l_cut))
        if sel.any():
            ax, ay = AX[sel], AY[sel]
            kids_x = np.concatenate([ax, ax + 0.5 * hx, ax, ax + 0.5 * hx])
            kids_y = np.concatenate([ay, ay, ay + 0.5 * hy, ay + 0.5 * hy])
            kids_l = None
            if L is not None:
                c00, c10, c01, c11 = L[sel].T
                b0, b1 = 0.5 * (c00 + c10), 0.5 * (c01 + c11)
                l0, l1 = 0.5 * (c00 + c01), 0.5 * (c10 + c11)
                mid = 0.25 * (c00 + c10 + c01 + c11)
                kids_l = np.concatenate([
                    np.column_stack([c00, b0, l0, mid]),
                    np.column_stack([b0, c10, mid, l1]),
                    np.column_stack([l0, mid, c01, b1]),
                    np.column_stack([mid, l1, b1, c11]),
                ])
            x, y, w = _cut_cells(kids_x, kids_y, 0.5 * hx, 0.5 * hy, kids_l, r, depth - 1, subsample)
            xs.append(x)
            ys.append(y)
            ws.append(w)
        return np.concatenate(xs), np.concatenate(ys), np.concatenate(ws)

    sel = d_cut & l_in
    if sel.any():
        ax, ay = AX[sel], AY[sel]
        area, mx, my = rect_disk_moments(ax, ax + hx, ay, ay + hy, r)
        ok = area > 0
        xs.append(mx[ok] / area[ok])
        ys.append(my[ok] / area[ok])
        ws.append(area[ok])

    sel = d_full & l_cut
    if sel.any():
        c00, c10, c01, c11 = L[sel].T
        n = c00.size
        unit = np.array([[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]])
        for tri, vals in (((0, 1, 2), (c00, c10, c11)), ((0, 2, 3), (c00, c11, c01))):
            p = np.broadcast_to(unit[list(tri)], (n, 3, 2)).copy()
            area, sx, sy = _clip_triangles(p, np.column_stack(vals))
            ok = area > 0
            xs.append(AX[sel][ok] + sx[ok] * hx)
            ys.append(AY[sel][ok] + sy[ok] * hy)
            ws.append(area[ok] * hx * hy)

    sel = d_cut & l_cut
    if sel.any():
        s = subsample
        off = (np.arange(s) + 0.5) / s
        SX, SY = (a.ravel()[None, :] for a in np.meshgrid(off, off, indexing="ij"))
        c00, c10, c01, c11 = (c[:, None] for c in L[sel].T)
        px = AX[sel][:, None] + SX * hx
        py = AY[sel][:, None] + SY * hy
        lv = c00 * (1 - SX) * (1 - SY) + c10 * SX * (1 - SY) + c01 * (1 - SX) * SY + c11 * SX * SY
        ok = (np.hypot(px, py) < r) & (lv > 0)
        xs.append(px[ok])
        ys.append(py[ok])
        ws.append(np.full(int(ok.sum()), hx * hy / (s * s)))
    return np.concatenate(xs), np.concatenate(ys), np.concatenate(ws)


def ball_rule(geom: GridGeometry, cx: float, cy: float, r: float,
              level: np.ndarray | None = None, refine: int = 2,
              subsample: int = 32) -> BallRule:
    """Quadrature rule for {|X - C| < r} (and level > 0 when given).

    Cut cells are halved `refine` times; the pieces cut by both the circle
    and the level set are sampled on a `subsample`^2 lattice.
    """
    g = geom
    i0 = max(0, int(np.floor((cx - r - g.x_min) / g.dx)))
    i1 = min(g.nx - 2, int(np.floor((cx + r - g.x_min) / g.dx)))
    j0 = max(0, int(np.floor((cy - r - g.y_min) / g.dy)))
    j1 = min(g.ny - 2, int(np.floor((cy + r - g.y_min) / g.dy)))
    ax = (g.x_min + np.arange(i0, i1 + 1) * g.dx - cx)[:, None]
    ay = (g.y_min + np.arange(j0, j1 + 1) * g.dy - cy)[None, :]
    AX, AY = np.broadcast_arrays(ax, ay)
    d_full, d_cut = _classify(AX, AY, g.dx, g.dy, r)

    if level is None:
        L = None
        l_in = np.ones(d_full.shape, dtype=bool)
        l_cut = np.zeros(d_full.shape, dtype=bool)
    else:
        B = level[i0:i1 + 2, j0:j1 + 2]
        L = np.stack([B[:-1, :-1], B[1:, :-1], B[:-1, 1:], B[1:, 1:]], axis=-1)
        npos = (L > 0).sum(axis=-1)
        l_in, l_cut = npos == 4, (npos > 0) & (npos < 4)

    wc = np.where(d_full & l_in, g.dx * g.dy, 0.0)
    cut = (d_full & l_cut) | (d_cut & (l_in | l_cut))
    if cut.any():
        px, py, w = _cut_cells(AX[cut], AY[cut], g.dx, g.dy,
                               None if L is None else L[cut], r, refine, subsample)
        # slivers from clipping can sit on the axis, where 1/x is undefined
        keep = np.abs(w) > 1e-9 * g.dx * g.dy
        px, py, w = px[keep] + cx, py[keep] + cy, w[keep]
    else:
        px = py = w = np.zeros(0)
    return BallRule(g, i0, j0, wc, px, py, w)


# -- interpolation -------------------------------------------------------------


def lagrange4(node: np.ndarray, geom: GridGeometry, x, y) -> np.ndarray:
    """Tensor 4-point Lagrange interpolation (one-sided near grid edges)."""
    g = geom
    fx = (np.asarray(x) - g.x_min) / g.dx
    fy = (np.asarray(y) - g.y_min) / g.dy
    bx = np.clip(np.floor(fx).astype(int) - 1, 0, g.nx - 4)
    by = np.clip(np.floor(fy).astype(int) - 1, 0, g.ny - 4)
    tx = fx - bx
    ty = fy - by
    wx = _lagrange_weights(tx)
    wy = _lagrange_weights(ty)
    out = np.zeros(np.shape(fx))
    for a in range(4):
        for b in range(4):
            out += wx[a] * wy[b] * node[bx + a, by + b]
    return out


def _lagrange_weights(t):
    # nodes at 0, 1, 2, 3
    return (
        -(t - 1) * (t - 2) * (t - 3) / 6.0,
        t * (t - 2) * (t - 3) / 2.0,
        -t * (t - 1) * (t - 3) / 2.0,
        t * (t - 1) * (t - 2) / 6.0,
    )


def bilinear(node: np.ndarray, geom: GridGeometry, x, y) -> np.ndarray:
    g = geom
    fx = (np.asarray(x) - g.x_min) / g.dx
    fy = (np.asarray(y) - g.y_min) / g.dy
    i = np.clip(np.floor(fx).astype(int), 0, g.nx - 2)
    j = np.clip(np.floor(fy).astype(int), 0, g.ny - 2)
    sx = fx - i
    sy = fy - j
    return (
        node[i, j] * (1 - sx) * (1 - sy)
        + node[i + 1, j] * sx * (1 - sy)
        + node[i, j + 1] * (1 - sx) * sy
        + node[i + 1, j + 1] * sx * sy
    )


# -- arc rule ------------------------------------------------------------------


def arc_integral(sample, cx, cy, r, theta_a, theta_b, n, periodic, level_fn=None,
                 axis_ends=False) -> float:
    """Integral over the arc theta in [theta_a, theta_b] of radius r, ds = r dtheta.

    `sample(x, y)` returns the smooth integrand (as if inside the fluid);
    `level_fn(x, y)` returns the level field, positive in the fluid, or
    None when the integrand applies everywhere. With `axis_ends`, the two
    end values sit on the axis where the integrand is a 0/0 limit and are
    replaced by quadratic extrapolation from the neighbouring nodes.
    """
    if periodic:
        th = theta_a + (theta_b - theta_a) * np.arange(n + 1) / n
    else:
        th = np.linspace(theta_a, theta_b, n + 1)
    x = cx + r * np.sin(th)
    y = cy + r * np.cos(th)
    if axis_ends:
        x[0] = x[-1] = np.nan
        inner = slice(1, -1)
        vals = np.empty(n + 1)
        vals[inner] = sample(x[inner], y[inner])
        vals[0] = 3 * vals[1] - 3 * vals[2] + vals[3]
        vals[-1] = 3 * vals[-2] - 3 * vals[-3] + vals[-4]
    elif periodic:
        vals = np.empty(n + 1)
        vals[:-1] = sample(x[:-1], y[:-1])
        vals[-1] = vals[0]
    else:
        vals = sample(x, y)
    dth = th[1] - th[0]
    if level_fn is None:
        return float(r * dth * (vals.sum() - 0.5 * (vals[0] + vals[-1])))
    lv = np.empty(n + 1)
    if axis_ends:
        lv[1:-1] = level_fn(x[1:-1], y[1:-1])
        lv[0], lv[-1] = lv[1], lv[-2]
    elif periodic:
        lv[:-1] = level_fn(x[:-1], y[:-1])
        lv[-1] = lv[0]
    else:
        lv = level_fn(x, y)
    ins = lv > 0
    both = ins[:-1] & ins[1:]
    total = float(np.sum(0.5 * (vals[:-1] + vals[1:])[both]) * dth)
    cross = ins[:-1] != ins[1:]
    if cross.any():
        k = np.nonzero(cross)[0]
        frac = lv[k] / (lv[k] - lv[k + 1])
        tc = th[k] + frac * dth
        xcr = cx + r * np.sin(tc)
        ycr = cy + r * np.cos(tc)
        vc = sample(xcr, ycr)
        vin = np.where(ins[k], vals[k], vals[k + 1])
        length = np.where(ins[k], frac, 1.0 - frac) * dth
        total += float(np.sum(0.5 * (vin + vc) * length))
    return r * total
