"""Star-shaped planar curves given by a trigonometric radius function.

A :class:`StarShape` is the region ``{c + r (cos t, sin t) : 0 <= r <= rho(t)}``
with ``rho(t) = a0 + sum_k a_k cos(k t) + b_k sin(k t)``. Integrals over the
boundary use the periodic trapezoid rule on a fixed 4096-node grid, which is
spectrally accurate for these curves.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

QUAD_NODES = 4096

__all__ = [
    "QUAD_NODES",
    "StarShape",
    "ShapePair",
    "InvalidShape",
    "ContainmentViolation",
    "NotStarShapedAboutCenter",
    "PairSamplingError",
    "circle",
    "area",
    "perimeter",
    "normalize_area",
    "validate_pair",
    "sample_random_pair",
]


class InvalidShape(ValueError):
    pass


class ContainmentViolation(ValueError):
    pass


class NotStarShapedAboutCenter(ValueError):
    pass


class PairSamplingError(RuntimeError):
    pass


def _theta(m=QUAD_NODES):
    return 2.0 * np.pi * np.arange(m) / m


@dataclass(frozen=True, eq=False)
class StarShape:
    center: tuple[float, float]
    a0: float
    a: np.ndarray
    b: np.ndarray

    def __post_init__(self):
        a = np.atleast_1d(np.asarray(self.a, dtype=float)).copy()
        b = np.atleast_1d(np.asarray(self.b, dtype=float)).copy()
        m = max(a.size, b.size)
        a = np.pad(a, (0, m - a.size))
        b = np.pad(b, (0, m - b.size))
        a.flags.writeable = False
        b.flags.writeable = False
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "b", b)
        object.__setattr__(self, "a0", float(self.a0))
        object.__setattr__(self, "center", (float(self.center[0]), float(self.center[1])))

    @property
    def modes(self) -> int:
        return self.a.size

    def radius(self, theta):
        theta = np.asarray(theta, dtype=float)
        out = np.full(theta.shape, self.a0)
        if self.modes == 0:
            return out
        # e^{ik theta} by repeated multiplication; far cheaper than cos/sin per mode
        z = np.exp(1j * theta)
        zk = z.copy()
        for ak, bk in zip(self.a, self.b):
            out += ak * zk.real + bk * zk.imag
            zk *= z
        return out

    def radius_derivative(self, theta):
        theta = np.asarray(theta, dtype=float)
        k = np.arange(1, self.modes + 1)
        kt = np.multiply.outer(theta, k)
        return np.cos(kt) @ (k * self.b) - np.sin(kt) @ (k * self.a)

    def point(self, theta):
        """Boundary points, shape ``theta.shape + (2,)``."""
        theta = np.asarray(theta, dtype=float)
        r = self.radius(theta)
        return np.stack(
            [self.center[0] + r * np.cos(theta), self.center[1] + r * np.sin(theta)], axis=-1
        )

    def is_valid(self) -> bool:
        if not (np.all(np.isfinite(self.a)) and np.all(np.isfinite(self.b)) and math.isfinite(self.a0)):
            return False
        if self.a0 > np.abs(self.a).sum() + np.abs(self.b).sum():
            return True
        return bool(np.all(self.radius(_theta()) > 0.0))

    def check(self) -> "StarShape":
        if not self.is_valid():
            raise InvalidShape("radius function is not positive everywhere")
        return self

    def scaled(self, factor: float) -> "StarShape":
        return StarShape(self.center, self.a0 * factor, self.a * factor, self.b * factor)

    def same_as(self, other: "StarShape") -> bool:
        m = max(self.modes, other.modes)
        pa = lambda v: np.pad(v, (0, m - v.size))  # noqa: E731
        return (
            self.center == other.center
            and self.a0 == other.a0
            and np.array_equal(pa(self.a), pa(other.a))
            and np.array_equal(pa(self.b), pa(other.b))
        )


def circle(radius: float = 1.0, center=(0.0, 0.0)) -> StarShape:
    return StarShape(center, radius, np.zeros(0), np.zeros(0))


def area(shape: StarShape) -> float:
    shape.check()
    rho = shape.radius(_theta())
    return 0.5 * float(np.mean(rho * rho)) * 2.0 * np.pi


def perimeter(shape: StarShape) -> float:
    shape.check()
    t = _theta()
    rho = shape.radius(t)
    drho = shape.radius_derivative(t)
    return float(np.mean(np.hypot(rho, drho))) * 2.0 * np.pi


def normalize_area(shape: StarShape, target: float) -> StarShape:
    if not target > 0:
        raise ValueError("target area must be positive")
    return shape.scaled(math.sqrt(target / area(shape)))


def _outside_measure(omega: StarShape, pts):
    """Positive outside omega, negative inside (radial distance to boundary)."""
    dx = pts[..., 0] - omega.center[0]
    dy = pts[..., 1] - omega.center[1]
    return np.hypot(dx, dy) - omega.radius(np.arctan2(dy, dx))


def ray_exit_radius(origin, omega: StarShape, theta, n_probe: int = 256):
    """Distance from ``origin`` along each ray to the boundary of ``omega``.

    Raises :class:`NotStarShapedAboutCenter` when ``origin`` is outside omega
    or some ray crosses the boundary more than once.
    """
    theta = np.asarray(theta, dtype=float)
    ox, oy = float(origin[0]), float(origin[1])
    if omega.center == (ox, oy):
        return omega.radius(theta)
    direction = np.stack([np.cos(theta), np.sin(theta)], axis=-1)
    o = np.array([ox, oy])
    if _outside_measure(omega, o[None, :])[0] >= 0.0:
        raise NotStarShapedAboutCenter("center of K lies outside Omega")
    t_max = math.hypot(ox - omega.center[0], oy - omega.center[1]) + float(
        np.max(np.abs(omega.radius(_theta())))
    ) * 1.01 + 1e-9
    ts = np.linspace(0.0, t_max, n_probe)
    pts = o + ts[None, :, None] * direction[:, None, :]
    f = _outside_measure(omega, pts)
    crossings = np.count_nonzero(np.diff(np.sign(f), axis=1) != 0, axis=1)
    if np.any(crossings != 1):
        raise NotStarShapedAboutCenter("a ray from K's center crosses Omega's boundary more than once")
    idx = np.argmax(f > 0, axis=1)
    lo = ts[idx - 1].copy()
    hi = ts[idx].copy()
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        fm = _outside_measure(omega, o + mid[:, None] * direction)
        inside = fm < 0
        lo = np.where(inside, mid, lo)
        hi = np.where(inside, hi, mid)
        if np.all(hi - lo <= 1e-15 * np.maximum(hi, 1.0)):
            break
    return 0.5 * (lo + hi)


@dataclass(frozen=True, eq=False)
class ShapePair:
    K: StarShape
    Omega: StarShape

    @property
    def degenerate(self) -> bool:
        """K coincides with Omega (the pair carries no annulus)."""
        return self.K.same_as(self.Omega)

    def omega_radius_about_k(self, theta):
        return ray_exit_radius(self.K.center, self.Omega, theta)


def validate_pair(K: StarShape, Omega: StarShape) -> ShapePair:
    K.check()
    Omega.check()
    pair = ShapePair(K, Omega)
    if pair.degenerate:
        return pair
    if _outside_measure(Omega, np.array([K.center]))[0] >= 0.0:
        raise ContainmentViolation("the center of K lies outside Omega")
    t = _theta()
    if np.any(_outside_measure(Omega, K.point(t)) > 0.0):
        raise ContainmentViolation("part of the boundary of K lies outside Omega")
    rho_k = K.radius(t)
    rho_o = pair.omega_radius_about_k(t)
    if np.any(rho_k > rho_o):
        bad = int(np.argmax(rho_k - rho_o))
        raise ContainmentViolation(
            f"K leaves Omega at theta={t[bad]:.6f} (rho_K={rho_k[bad]:.6g} > {rho_o[bad]:.6g})"
        )
    return pair


def sample_random_pair(seed, M: float, amplitude: float, modes: int = 6, max_tries: int = 100) -> ShapePair:
    """Seeded perturbed pair with area(K) = pi and area(Omega) = M.

    Fourier coefficients are uniform in [-amplitude, amplitude] relative to
    the mean radius; Omega's center is offset by up to ``amplitude`` times the
    gap between the mean radii.
    """
    if not M > math.pi:
        raise ValueError("M must exceed pi")
    rng = np.random.default_rng(seed)
    R = math.sqrt(M / math.pi)
    for _ in range(max_tries):
        ka = rng.uniform(-amplitude, amplitude, modes)
        kb = rng.uniform(-amplitude, amplitude, modes)
        oa = R * rng.uniform(-amplitude, amplitude, modes)
        ob = R * rng.uniform(-amplitude, amplitude, modes)
        off_r = amplitude * (R - 1.0) * math.sqrt(rng.uniform())
        off_t = rng.uniform(0.0, 2.0 * np.pi)
        K = StarShape((0.0, 0.0), 1.0, ka, kb)
        Om = StarShape((off_r * math.cos(off_t), off_r * math.sin(off_t)), R, oa, ob)
        if not (K.is_valid() and Om.is_valid()):
            continue
        K = normalize_area(K, math.pi)
        Om = normalize_area(Om, M)
        try:
            return validate_pair(K, Om)
        except (ContainmentViolation, NotStarShapedAboutCenter):
            continue
    raise PairSamplingError(f"no valid pair after {max_tries} draws (seed={seed})")
