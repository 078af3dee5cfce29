"""Homogeneous blow-up profiles and their checks.

Polar convention used everywhere in the package: theta is measured from the
positive y-axis, so (x, y) = (r sin(theta), r cos(theta)) and theta = pi
points straight down.
"""

from __future__ import annotations

import enum
import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from .special_functions import (
    ConeAngle,
    cone_angle,
    legendre_p,
    legendre_p_prime,
    legendre_p_second,
)

SQRT2_3 = math.sqrt(2.0) / 3.0
STOKES_LO = 2.0 * math.pi / 3.0
STOKES_HI = 4.0 * math.pi / 3.0
RAY_SLACK = 1e-12


@dataclass(frozen=True)
class PolarPoint:
    r: float
    theta: float

    @classmethod
    def from_xy(cls, x: float, y: float) -> "PolarPoint":
        r, th = to_polar(x, y)
        return cls(float(r), float(th))

    def to_xy(self) -> tuple[float, float]:
        return self.r * math.sin(self.theta), self.r * math.cos(self.theta)


def to_polar(x, y):
    """(r, theta) with theta in [0, 2 pi) measured from +y."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    r = np.hypot(x, y)
    th = np.mod(np.arctan2(x, y), 2.0 * np.pi)
    if r.ndim == 0:
        return float(r), float(th)
    return r, th


def from_polar(r, theta):
    return r * np.sin(theta), r * np.cos(theta)


class ProfileKind(str, enum.Enum):
    ZERO = "Zero"
    STOKES_CORNER = "StokesCorner"
    AXIS_PARABOLIC = "AxisParabolic"
    GARABEDIAN_BUBBLE = "GarabedianBubble"


KAPPA = {
    ProfileKind.ZERO: float("nan"),
    ProfileKind.STOKES_CORNER: 1.5,
    ProfileKind.AXIS_PARABOLIC: 2.0,
    ProfileKind.GARABEDIAN_BUBBLE: 2.5,
}


# -- Stokes corner ---------------------------------------------------------
#
# The phase is theta_1 = +pi/2: psi = C1 r^{3/2} cos(3 theta/2 + pi/2)
# = -C1 r^{3/2} sin(3 theta/2), which is positive on 2pi/3 < theta < 4pi/3.


def _stokes_angular(th):
    # closed cone so that gradients on the free rays are the one-sided limits;
    # the slack absorbs roundoff in coordinates shifted by x0
    inside = (th >= STOKES_LO - RAY_SLACK) & (th <= STOKES_HI + RAY_SLACK)
    g = np.where(inside, np.maximum(-np.sin(1.5 * th), 0.0), 0.0)
    dg = np.where(inside, -1.5 * np.cos(1.5 * th), 0.0)
    return g, dg


def stokes_corner_values(x0: float, x, y):
    """Stokes corner profile at local coordinates (x, y) relative to (x0, 0)."""
    r, th = to_polar(x, y)
    g, _ = _stokes_angular(np.asarray(th))
    out = SQRT2_3 * x0 * np.asarray(r) ** 1.5 * g
    return float(out) if np.ndim(out) == 0 else out


def stokes_corner_gradients(x0: float, x, y):
    r, th = to_polar(x, y)
    r = np.asarray(r, dtype=float)
    th = np.asarray(th, dtype=float)
    g, dg = _stokes_angular(th)
    c = SQRT2_3 * x0
    sr = np.sqrt(r)
    d_r = 1.5 * c * sr * g
    d_t = c * sr * dg  # (1/r) d/dtheta
    gx = d_r * np.sin(th) + d_t * np.cos(th)
    gy = d_r * np.cos(th) - d_t * np.sin(th)
    return gx, gy


def stokes_corner_eval(x0: float, p: PolarPoint) -> float:
    if x0 <= 0:
        raise ValueError("x0 must be positive")
    x, y = p.to_xy()
    return stokes_corner_values(x0, x, y)


def stokes_corner_gradient(x0: float, p: PolarPoint) -> tuple[float, float]:
    """Cartesian gradient; the zero vector at the vertex r = 0."""
    if p.r == 0.0:
        return 0.0, 0.0
    x, y = p.to_xy()
    gx, gy = stokes_corner_gradients(x0, x, y)
    return float(gx), float(gy)


# -- axis parabolic ----------------------------------------------------------


def axis_parabolic_eval(C: float, x, y=None):
    if C <= 0:
        raise ValueError("C must be positive")
    out = C * np.square(np.maximum(np.asarray(x, dtype=float), 0.0))
    return float(out) if np.ndim(out) == 0 else out


# -- Garabedian bubble -------------------------------------------------------


def determine_garabedian_constant(cone: ConeAngle | None = None) -> float:
    """C0 fixed by |grad psi|^2 = -x^2 y on the free ray theta = theta*.

    On that ray psi and P'(z*) vanish, so only the angular derivative is
    left: |grad psi|^2 = C0^2 r^3 sin^6(theta*) P''(z*)^2, while
    -x^2 y = -r^3 sin^2(theta*) z*.
    """
    cone = cone or cone_angle()
    s2 = math.sin(cone.theta_star) ** 2
    return math.sqrt(-cone.z_star) / (s2 * abs(legendre_p_second(1.5, cone.z_star)))


def _garabedian_angular(th, theta_star):
    th = np.asarray(th, dtype=float)
    # s and ds vanish on the axis (theta = 0), where z = 1 is outside the series domain
    inside = (th > 0.0) & (th <= theta_star)
    s = np.zeros(th.shape)
    ds = np.zeros(th.shape)
    if np.any(inside):
        t_in = th[inside]
        z = np.cos(t_in)
        sn = np.sin(t_in)
        p1 = legendre_p_prime(1.5, z)
        p2 = legendre_p_second(1.5, z)
        s[inside] = np.maximum(sn * sn * p1, 0.0)
        ds[inside] = 2.0 * sn * z * p1 - sn**3 * p2
    return s, ds


def garabedian_values(C0: float, cone: ConeAngle, x, y):
    r, th = to_polar(x, y)
    s, _ = _garabedian_angular(np.atleast_1d(th), cone.theta_star)
    out = C0 * np.atleast_1d(r) ** 2.5 * s
    return float(out[0]) if np.ndim(r) == 0 else out.reshape(np.shape(r))


def garabedian_gradients(C0: float, cone: ConeAngle, x, y):
    r, th = to_polar(x, y)
    shape = np.shape(r)
    r = np.atleast_1d(r)
    th = np.atleast_1d(th)
    s, ds = _garabedian_angular(th, cone.theta_star)
    r15 = r**1.5
    d_r = 2.5 * C0 * r15 * s
    d_t = C0 * r15 * ds
    gx = d_r * np.sin(th) + d_t * np.cos(th)
    gy = d_r * np.cos(th) - d_t * np.sin(th)
    return gx.reshape(shape), gy.reshape(shape)


def garabedian_eval(C0: float, cone: ConeAngle, p: PolarPoint) -> float:
    x, y = p.to_xy()
    return garabedian_values(C0, cone, x, y)


def garabedian_gradient(C0: float, cone: ConeAngle, p: PolarPoint) -> tuple[float, float]:
    if p.r == 0.0:
        return 0.0, 0.0
    x, y = p.to_xy()
    gx, gy = garabedian_gradients(C0, cone, x, y)
    return float(gx), float(gy)


# -- profile record ----------------------------------------------------------


@dataclass(frozen=True)
class BlowupProfile:
    """One closed-form homogeneous blow-up limit.

    `center` places the profile in the (x, y) half-plane: (x0, 0) for the
    Stokes corner, (0, y0) for the axis profile, the origin for the bubble.
    `values` and `gradients` take global coordinates.
    """

    kind: ProfileKind
    x0: float = 0.0
    y0: float = 0.0
    C: float = 0.0
    C0: float = 0.0
    cone: ConeAngle | None = field(default=None, compare=False)

    @classmethod
    def zero(cls) -> "BlowupProfile":
        return cls(ProfileKind.ZERO)

    @classmethod
    def stokes(cls, x0: float = 1.0) -> "BlowupProfile":
        if x0 <= 0:
            raise ValueError("x0 must be positive")
        return cls(ProfileKind.STOKES_CORNER, x0=x0)

    @classmethod
    def axis(cls, C: float = 1.0, y0: float = -1.0) -> "BlowupProfile":
        if C <= 0:
            raise ValueError("C must be positive")
        return cls(ProfileKind.AXIS_PARABOLIC, y0=y0, C=C)

    @classmethod
    def garabedian(cls, cone: ConeAngle | None = None) -> "BlowupProfile":
        cone = cone or cone_angle()
        return cls(
            ProfileKind.GARABEDIAN_BUBBLE,
            C0=determine_garabedian_constant(cone),
            cone=cone,
        )

    @property
    def kappa(self) -> float:
        return KAPPA[self.kind]

    @property
    def center(self) -> tuple[float, float]:
        if self.kind is ProfileKind.STOKES_CORNER:
            return self.x0, 0.0
        if self.kind is ProfileKind.AXIS_PARABOLIC:
            return 0.0, self.y0
        return 0.0, 0.0

    def local_values(self, x, y):
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        if self.kind is ProfileKind.STOKES_CORNER:
            return stokes_corner_values(self.x0, x, y)
        if self.kind is ProfileKind.AXIS_PARABOLIC:
            return self.C * np.square(np.maximum(x, 0.0)) + 0.0 * y
        if self.kind is ProfileKind.GARABEDIAN_BUBBLE:
            return garabedian_values(self.C0, self.cone, x, y)
        return np.zeros(np.broadcast(x, y).shape)

    def local_gradients(self, x, y):
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        if self.kind is ProfileKind.STOKES_CORNER:
            return stokes_corner_gradients(self.x0, x, y)
        if self.kind is ProfileKind.AXIS_PARABOLIC:
            return 2.0 * self.C * np.maximum(x, 0.0) + 0.0 * y, np.zeros(np.broadcast(x, y).shape)
        if self.kind is ProfileKind.GARABEDIAN_BUBBLE:
            return garabedian_gradients(self.C0, self.cone, x, y)
        z = np.zeros(np.broadcast(x, y).shape)
        return z, z.copy()

    def values(self, x, y):
        cx, cy = self.center
        return self.local_values(np.asarray(x) - cx, np.asarray(y) - cy)

    def gradients(self, x, y):
        cx, cy = self.center
        return self.local_gradients(np.asarray(x) - cx, np.asarray(y) - cy)

    def support_rays(self) -> tuple[float, ...]:
        """Polar angles of the free rays bounding the support cone."""
        if self.kind is ProfileKind.STOKES_CORNER:
            return (STOKES_LO, STOKES_HI)
        if self.kind is ProfileKind.GARABEDIAN_BUBBLE:
            return (self.cone.theta_star,)
        return ()


# -- conjugate potential -----------------------------------------------------


@dataclass(frozen=True)
class ConjugatePotential:
    """Phi_0 with dPhi/dx = -(1/x) dpsi/dy and dPhi/dy = (1/x) dpsi/dx.

    For C x^2 this is 2 C y. For the bubble it is a r^{3/2} P_{3/2}(cos theta)
    with a = 5 C0 / 2, found by matching the two sides on the axis where
    sin^2(theta) P'(cos theta) ~ (x/r)^2 P'(1) and P'_{3/2}(1) = 15/8.
    """

    profile: BlowupProfile

    def __post_init__(self):
        if self.profile.kind not in (ProfileKind.AXIS_PARABOLIC, ProfileKind.GARABEDIAN_BUBBLE):
            raise ValueError("conjugate potential needs an axis or bubble profile")

    @property
    def degree(self) -> float:
        return self.profile.kappa - 1.0

    @property
    def amplitude(self) -> float:
        if self.profile.kind is ProfileKind.AXIS_PARABOLIC:
            return 2.0 * self.profile.C
        return 2.5 * self.profile.C0

    def local_values(self, x, y):
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        if self.profile.kind is ProfileKind.AXIS_PARABOLIC:
            return self.amplitude * y + 0.0 * x
        r, th = to_polar(x, y)
        r = np.atleast_1d(r)
        z = np.cos(np.atleast_1d(th))
        out = self.amplitude * r**1.5 * legendre_p(1.5, np.clip(z, -1 + 1e-15, 1 - 1e-15))
        return out.reshape(np.shape(x)) if np.ndim(x) else float(out[0])

    def values(self, x, y):
        cx, cy = self.profile.center
        return self.local_values(np.asarray(x) - cx, np.asarray(y) - cy)


def _support_samples(profile: BlowupProfile, n: int = 12):
    """Local sample points well inside the support, away from the axis."""
    if profile.kind is ProfileKind.AXIS_PARABOLIC:
        xs = np.linspace(0.3, 1.0, n)
        ys = np.linspace(-0.8, 0.8, n)
        X, Y = np.meshgrid(xs, ys, indexing="ij")
        return X.ravel(), Y.ravel(), 0.3
    ts = profile.cone.theta_star
    rs = np.linspace(0.5, 1.0, n)
    th = np.linspace(0.2 * ts, 0.8 * ts, n)
    R, T = np.meshgrid(rs, th, indexing="ij")
    X, Y = from_polar(R, T)
    clearance = float(np.min(np.minimum(X, R * np.sin(np.minimum(T, ts - T)))))
    return X.ravel(), Y.ravel(), clearance


def conjugate_check(profile: BlowupProfile, h: float) -> float:
    """Max finite-difference residual of both conjugate relations.

    Derivatives of Phi_0 and psi_0 are central differences with step h on a
    fixed sample inside the support (local coordinates). Warns when h is
    not small against the distance to the support boundary or the axis.
    """
    if h <= 0:
        raise ValueError("h must be positive")
    phi = ConjugatePotential(profile)
    x, y, clearance = _support_samples(profile)
    if h > 0.1 * clearance:
        warnings.warn(
            f"step h={h} is not small against the support clearance {clearance:.3g}",
            RuntimeWarning,
            stacklevel=2,
        )
    f = phi.local_values
    p = profile.local_values
    phx = (f(x + h, y) - f(x - h, y)) / (2 * h)
    phy = (f(x, y + h) - f(x, y - h)) / (2 * h)
    psx = (p(x + h, y) - p(x - h, y)) / (2 * h)
    psy = (p(x, y + h) - p(x, y - h)) / (2 * h)
    r1 = np.abs(phx + psy / x)
    r2 = np.abs(phy - psx / x)
    return float(max(r1.max(), r2.max()))


# -- finite-difference operators used by the checks --------------------------


def laplacian_5pt(u: np.ndarray, h: float) -> np.ndarray:
    """Interior 5-point Laplacian; array indexed [ix, iy]."""
    return (u[2:, 1:-1] + u[:-2, 1:-1] + u[1:-1, 2:] + u[1:-1, :-2] - 4.0 * u[1:-1, 1:-1]) / (h * h)


def weighted_divergence(u: np.ndarray, x: np.ndarray, h: float) -> np.ndarray:
    """Interior conservative form of div((1/x) grad u) on a uniform grid.

    `x` is the 1-D array of node abscissae (all positive for interior
    nodes); face weights use the midpoint abscissae.
    """
    xm = 0.5 * (x[1:] + x[:-1])
    flux_x = (u[1:, :] - u[:-1, :]) / (h * xm[:, None])
    div_x = (flux_x[1:, 1:-1] - flux_x[:-1, 1:-1]) / h
    div_y = (u[1:-1, 2:] - 2.0 * u[1:-1, 1:-1] + u[1:-1, :-2]) / (h * h * x[1:-1, None])
    return div_x + div_y
