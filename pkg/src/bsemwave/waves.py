"""Linear wave physics: dispersion, celerities, Bergmann transform, bathymetry.

Conventions: SI units, time dependence exp(-i omega t), g = 9.81 m/s^2.
The modified wave number of the transformed Helmholtz problem is taken as
the local wave number k(x, y) (the curvature correction is dropped).
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

G = 9.81


@dataclass(frozen=True)
class WaveEnvironment:
    """Frequency, incidence direction and incident potential scale."""

    omega: float
    theta: float = 0.0
    amplitude: complex = 1.0

    def __post_init__(self):
        if not self.omega > 0:
            raise ValueError("angular frequency must be positive")

    @classmethod
    def from_period(cls, period: float, theta: float = 0.0, amplitude: complex = 1.0):
        return cls(2 * math.pi / period, theta, amplitude)

    @property
    def g(self) -> float:
        return G


@dataclass(frozen=True)
class DispersionState:
    k: np.ndarray
    c: np.ndarray
    cg: np.ndarray
    khat: np.ndarray

    @property
    def ccg(self):
        return self.c * self.cg


def _dispersion_scalar(omega: float, h: float) -> float:
    k0 = omega**2 / G
    # Guo-type start: exact in both the deep and shallow limits
    k = k0 / math.tanh(k0 * h) if k0 * h < 20 else k0
    for _ in range(50):
        t = math.tanh(k * h)
        f = G * k * t - omega**2
        df = G * t + G * k * h * (1 - t * t)
        step = f / df
        k -= step
        if not k > 0:
            break
        if abs(step) <= 1e-15 * k:
            return k
    # bisection fallback
    lo, hi = 1e-8, 10 * k0 + 10 / h
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if G * mid * math.tanh(mid * h) > omega**2:
            hi = mid
        else:
            lo = mid
        if hi - lo <= 1e-15 * hi:
            break
    return 0.5 * (lo + hi)


def solve_dispersion(omega, h):
    """Positive root k of omega^2 = g k tanh(k h). Broadcasts over h."""
    if np.any(np.asarray(omega) <= 0) or np.any(np.asarray(h) <= 0):
        raise ValueError("omega and depth must be positive")
    if np.ndim(h) == 0 and np.ndim(omega) == 0:
        return _dispersion_scalar(float(omega), float(h))
    om, hh = np.broadcast_arrays(np.asarray(omega, float), np.asarray(h, float))
    out = np.empty(om.shape)
    flat_o, flat_h, flat = om.ravel(), hh.ravel(), out.reshape(-1)
    # depths repeat a lot on structured meshes
    cache: dict = {}
    for i, (o, d) in enumerate(zip(flat_o, flat_h)):
        key = (o, d)
        if key not in cache:
            cache[key] = _dispersion_scalar(o, d)
        flat[i] = cache[key]
    return out


def velocities(k, h, omega):
    """Phase and group celerity (c, c_g) from linear theory."""
    k = np.asarray(k, float)
    h = np.asarray(h, float)
    c = omega / k
    kh2 = 2 * k * h
    # 2kh/sinh(2kh) underflows harmlessly for deep water
    with np.errstate(over="ignore"):
        ratio = np.where(kh2 > 700, 0.0, kh2 / np.sinh(np.minimum(kh2, 700)))
    n = 0.5 * (1 + ratio)
    return c[()], (n * c)[()]


def dispersion_state(omega: float, h) -> DispersionState:
    k = solve_dispersion(omega, h)
    c, cg = velocities(k, h, omega)
    return DispersionState(k=np.asarray(k), c=np.asarray(c), cg=np.asarray(cg), khat=np.asarray(k))


def bergmann_forward(phi, c, cg):
    """phi_hat = phi * sqrt(c c_g)."""
    return phi * np.sqrt(c * cg)


def bergmann_inverse(phi_hat, c, cg):
    """phi = phi_hat / sqrt(c c_g)."""
    return phi_hat / np.sqrt(c * cg)


def wave_height(phi, omega: float):
    """H = 2 omega |phi| / g."""
    if omega <= 0:
        raise ValueError("omega must be positive")
    return 2 * omega * np.abs(phi) / G


# ---------------------------------------------------------------------------
# bathymetry
# ---------------------------------------------------------------------------


def depth_circular_shoal(x, y, xc: float = 1.2, yc: float = 1.2):
    """Parabolic shoal: 0.1 (r/0.8)^2 + 0.05 inside r < 0.8, 0.15 outside."""
    r = np.hypot(np.asarray(x, float) - xc, np.asarray(y, float) - yc)
    return np.where(r < 0.8, 0.1 * (r / 0.8) ** 2 + 0.05, 0.15)[()]


def depth_slope(x):
    """2 % plane slope from 0.45 m (x < -5.85) to 0.05 m (x > 14.15)."""
    x = np.asarray(x, float)
    return np.clip(0.45 - 0.02 * (5.85 + x), 0.05, 0.45)[()]


def depth_shoal_perturbation(x, y):
    """Elliptic shoal height, zero outside (x/3)^2 + (y/4)^2 <= 1."""
    x = np.asarray(x, float)
    y = np.asarray(y, float)
    inside = (x / 3) ** 2 + (y / 4) ** 2 <= 1
    arg = np.where(inside, 1 - (x / 3.75) ** 2 - (y / 5) ** 2, 1.0)
    return np.where(inside, 0.3 - 0.5 * np.sqrt(arg), 0.0)[()]


def depth_elliptic(x, y):
    """Sloping bed plus elliptic shoal."""
    return depth_slope(x) + depth_shoal_perturbation(x, y)


class Bathymetry:
    """Depth field h_w(x, y) > 0.

    ``kinks`` lists curves (as predicates on element bounding boxes) where
    the depth has a discontinuous derivative; quadrature may use it.
    """

    name = "bathymetry"

    def depth(self, x, y):
        raise NotImplementedError

    def is_x_only(self) -> bool:
        return False

    def crosses_kink(self, xmin, xmax, ymin, ymax) -> bool:
        return False

    def khat(self, omega: float, x, y):
        return solve_dispersion(omega, self.depth(x, y))

    def ccg(self, omega: float, x, y):
        h = self.depth(x, y)
        k = solve_dispersion(omega, h)
        c, cg = velocities(k, h, omega)
        return c * cg


@dataclass(frozen=True)
class Constant(Bathymetry):
    h: float
    name = "constant"

    def __post_init__(self):
        if not self.h > 0:
            raise ValueError("depth must be positive")

    def depth(self, x, y):
        return np.full(np.broadcast(np.asarray(x), np.asarray(y)).shape, self.h)[()]

    def is_x_only(self) -> bool:
        return True


@dataclass(frozen=True)
class CircularShoal(Bathymetry):
    xc: float = 1.2
    yc: float = 1.2
    name = "circular_shoal"

    def depth(self, x, y):
        return depth_circular_shoal(x, y, self.xc, self.yc)

    def crosses_kink(self, xmin, xmax, ymin, ymax) -> bool:
        # does the circle r = 0.8 pass through the box?
        dx = max(xmin - self.xc, 0.0, self.xc - xmax)
        dy = max(ymin - self.yc, 0.0, self.yc - ymax)
        near = math.hypot(dx, dy)
        far = math.hypot(max(abs(xmin - self.xc), abs(xmax - self.xc)),
                         max(abs(ymin - self.yc), abs(ymax - self.yc)))
        return near < 0.8 < far


@dataclass(frozen=True)
class PiecewiseX(Bathymetry):
    """Depth depending on x only, flat for x < a and x > c."""

    func: Callable
    a: float
    c: float
    name = "piecewise_x"

    def depth(self, x, y=None):
        x = np.asarray(x, float)
        xx = np.clip(x, self.a, self.c)
        return np.asarray(self.func(xx), float)[()] * np.ones_like(x)[()]

    def is_x_only(self) -> bool:
        return True

    def crosses_kink(self, xmin, xmax, ymin, ymax) -> bool:
        return xmin < self.a < xmax or xmin < self.c < xmax


def slope_profile() -> PiecewiseX:
    """x-only part of the elliptic-shoal bed (flat ends at x=-5.85, 14.15)."""
    return PiecewiseX(depth_slope, -5.85, 14.15)


@dataclass(frozen=True)
class SlopeEllipticShoal(Bathymetry):
    name = "elliptic_shoal"

    def depth(self, x, y):
        return depth_elliptic(x, y)

    def outer_profile(self) -> PiecewiseX:
        return slope_profile()

    def crosses_kink(self, xmin, xmax, ymin, ymax) -> bool:
        if xmin < -5.85 < xmax or xmin < 14.15 < xmax:
            return True
        corners = [((xmin / 3) ** 2 + (yy / 4) ** 2) for yy in (ymin, ymax)]
        corners += [((xmax / 3) ** 2 + (yy / 4) ** 2) for yy in (ymin, ymax)]
        cx = 0.0 if xmin <= 0 <= xmax else min(abs(xmin), abs(xmax))
        cy = 0.0 if ymin <= 0 <= ymax else min(abs(ymin), abs(ymax))
        lo = (cx / 3) ** 2 + (cy / 4) ** 2
        return lo < 1 < max(corners)


def modified_wavenumber(env: WaveEnvironment, bathymetry: Bathymetry, x, y):
    """k_hat = k(h_w(x, y)); the curvature correction is not included."""
    return bathymetry.khat(env.omega, x, y)
