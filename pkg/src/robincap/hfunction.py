"""Level-set functional H(t, phi) on radial and finite-element solutions.

For a solution u and a level t, U_t = {u > t}. The functional is

    H(t, phi) = int_{internal boundary of U_t} |phi|^(p-1)
                - (p-1) int_{U_t} |phi|^p
                + beta * length(external boundary of U_t)

On a P1 mesh U_t is obtained exactly by clipping each triangle against the
level. The test field phi is piecewise constant per triangle; a separate set
of per-triangle values may be supplied for the level segments. phi is taken
to vanish on K (where u = 1 and the gradient is zero).
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Callable, Union

import numpy as np
from scipy import integrate

from . import kernels
from .fem import FemSolution
from .radial import (
    ProblemParams,
    _denominator,
    _phi_diff,
    ball_energy,
    gradient_ratio,
    lemma5_predicate,
    u_star,
    unit_ball_volume,
)

logger = logging.getLogger(__name__)

__all__ = [
    "LevelSetGeometry",
    "HEvaluation",
    "extract_level_set",
    "h_function",
    "h_scan",
    "scan_levels",
    "solution_ratio_phi",
    "recovered_gradient",
    "h_star_radial",
    "h_radial",
    "r_of_t",
    "derearranged_phi",
    "lemma2_search",
    "weighted_h_integral",
    "weighted_h_integral_radial",
    "centroid_drift",
    "convexity_gap",
]

N_LEVELS = 200
TIE_SHIFT = 1e-12

PhiLevel = Union[None, np.ndarray, Callable[["LevelSetGeometry"], np.ndarray]]


@dataclass
class LevelSetGeometry:
    t: float
    internal_curves: np.ndarray
    internal_length: float
    superlevel_area: float
    external_length: float
    centroid: np.ndarray
    tri_area: np.ndarray
    tri_segment_length: np.ndarray
    tri_moment: np.ndarray
    segments: np.ndarray


@dataclass(frozen=True)
class HEvaluation:
    t: float
    h_value: float
    parts: tuple[float, float, float]


def _untie(values, t):
    while np.any(values == t):
        t += TIE_SHIFT
    return t


def extract_level_set(solution: FemSolution, t: float) -> LevelSetGeometry:
    """Exact superlevel set of the P1 field at level ``t``.

    If ``t`` coincides with a nodal value it is shifted up by 1e-12.
    """
    if not 0.0 < t < 1.0:
        raise ValueError("t must lie in (0, 1)")
    if not solution.converged:
        logger.warning("level set of an unconverged solution")
    mesh = solution.mesh
    u = solution.values
    t = _untie(u, t)
    tri_area, moments, segs = kernels.clip_level(mesh.nodes, mesh.triangles, u, t)
    seg_len = np.hypot(segs[:, 1, 0] - segs[:, 0, 0], segs[:, 1, 1] - segs[:, 0, 1])
    seg_len = np.where(np.isnan(seg_len), 0.0, seg_len)
    has_seg = seg_len > 0.0

    va = u[mesh.outer_edges[:, 0]]
    vb = u[mesh.outer_edges[:, 1]]
    hi, lo = np.maximum(va, vb), np.minimum(va, vb)
    with np.errstate(divide="ignore", invalid="ignore"):
        frac = np.where(lo > t, 1.0, np.where(hi <= t, 0.0, (hi - t) / (hi - lo)))
    external = float(np.sum(mesh.edge_lengths * frac))

    a_k = mesh.inner_area
    area = a_k + float(tri_area.sum())
    centroid = (a_k * mesh.inner_centroid + moments.sum(axis=0)) / area
    return LevelSetGeometry(
        t=t,
        internal_curves=segs[has_seg],
        internal_length=float(seg_len.sum()),
        superlevel_area=area,
        external_length=external,
        centroid=centroid,
        tri_area=tri_area,
        tri_segment_length=seg_len,
        tri_moment=moments,
        segments=segs,
    )


def h_function(solution: FemSolution, t: float, phi, params: ProblemParams, phi_level: PhiLevel = None, geometry: LevelSetGeometry | None = None) -> HEvaluation:
    """H(t, phi) for per-triangle ``phi``; ``phi_level`` overrides phi on the level segments.

    Either may also be a callable taking the :class:`LevelSetGeometry`, for
    fields that depend on where the level cuts each triangle.
    """
    mesh = solution.mesh
    geo = geometry if geometry is not None else extract_level_set(solution, t)
    if callable(phi):
        phi = phi(geo)
    phi = np.abs(np.asarray(phi, dtype=float))
    if phi.shape != (len(mesh.triangles),):
        raise ValueError(f"phi needs one value per triangle ({len(mesh.triangles)}), got {phi.shape}")
    if phi_level is None:
        lev = phi
    elif callable(phi_level):
        lev = np.abs(np.asarray(phi_level(geo), dtype=float))
    else:
        lev = np.abs(np.asarray(phi_level, dtype=float))
    if lev.shape != phi.shape:
        raise ValueError("phi_level must have one value per triangle")
    p = params.p
    internal = float(np.sum(geo.tri_segment_length * lev ** (p - 1.0)))
    bulk = -(p - 1.0) * float(np.sum(geo.tri_area * phi**p))
    external = params.beta * geo.external_length
    return HEvaluation(geo.t, internal + bulk + external, (internal, bulk, external))


def recovered_gradient(solution: FemSolution) -> np.ndarray:
    """Nodal gradients by area-weighted averaging of the adjacent triangle gradients."""
    mesh = solution.mesh
    u = solution.values
    g = np.einsum("tk,tkd->td", u[mesh.triangles], mesh.shape_gradients)
    w = np.repeat(mesh.triangle_areas, 3)
    idx = mesh.triangles.ravel()
    n = len(mesh.nodes)
    den = np.bincount(idx, weights=w, minlength=n)
    out = np.empty((n, 2))
    for d in range(2):
        out[:, d] = np.bincount(idx, weights=w * np.repeat(g[:, d], 3), minlength=n) / den
    return out


def solution_ratio_phi(solution: FemSolution):
    """|grad u| / u as ``(phi, phi_level)`` for :func:`h_function`.

    In the area term u is evaluated at the centroid of the part of each
    triangle inside U_t. On the level segments u = t exactly and |grad u| is
    taken from the recovered nodal gradient at the segment midpoint: the raw
    P1 gradient is a cell secant and only first-order accurate there.
    """
    mesh = solution.mesh
    u = solution.values
    ut = u[mesh.triangles]
    G = mesh.shape_gradients
    g = np.einsum("tk,tkd->td", ut, G)
    gnorm = np.hypot(g[:, 0], g[:, 1])
    u_mean = ut.mean(axis=1)
    x0 = mesh.nodes[mesh.triangles[:, 0]]
    grec = recovered_gradient(solution)[mesh.triangles]

    def phi(geo: LevelSetGeometry):
        with np.errstate(divide="ignore", invalid="ignore"):
            c = geo.tri_moment / geo.tri_area[:, None]
        u_c = ut[:, 0] + np.einsum("td,td->t", g, c - x0)
        u_c = np.where(geo.tri_area > 0.0, u_c, u_mean)
        return gnorm / u_c

    def phi_level(geo: LevelSetGeometry):
        mid = 0.5 * (geo.segments[:, 0] + geo.segments[:, 1])
        lam = np.einsum("tkd,td->tk", G, mid - x0)
        lam[:, 0] += 1.0
        gm = np.einsum("tk,tkd->td", lam, grec)
        val = np.hypot(gm[:, 0], gm[:, 1]) / geo.t
        return np.where(geo.tri_segment_length > 0.0, val, 0.0)

    return phi, phi_level


def scan_levels(solution: FemSolution, n_levels: int = N_LEVELS) -> np.ndarray:
    """``n_levels`` uniformly spaced levels strictly inside (min outer trace, 1)."""
    t_lo = float(np.min(solution.values[solution.mesh.outer_nodes]))
    return np.linspace(t_lo, 1.0, n_levels + 2)[1:-1]


def h_scan(solution: FemSolution, params: ProblemParams, phi, phi_level: PhiLevel = None, levels=None) -> list[HEvaluation]:
    levels = scan_levels(solution) if levels is None else levels
    return [h_function(solution, float(t), phi, params, phi_level) for t in levels]


# --------------------------------------------------------------------------
# radial case, in closed form plus quadrature


def _radius_at_level(params: ProblemParams, R: float, t: float) -> float:
    # invert u*(rho) = t through the potential difference
    y = (1.0 - t) * _denominator(params, R) / params.b
    n, p = params.n, params.p
    if p == n:
        return math.exp(y)
    k = (n - p) / (p - 1.0)
    return math.exp(-math.log1p(-k * y) / k)


def _ratio_power_mass(params: ProblemParams, R: float, rho: float) -> float:
    """int_{B_rho} (|grad u*| / u*)^p for rho in [1, R]."""
    if rho <= 1.0:
        return 0.0
    s = params.sphere_area
    val, _ = integrate.quad(
        lambda r: s * r ** (params.n - 1) * gradient_ratio(params, R, r) ** params.p,
        1.0,
        rho,
        epsabs=0.0,
        epsrel=1e-13,
        limit=200,
    )
    return val


def h_radial(params: ProblemParams, R: float, t: float, scale: float = 1.0) -> float:
    """H on (B_1, B_R) for phi = scale * |grad u*| / u*, any t in (0, 1)."""
    if not 0.0 < t < 1.0:
        raise ValueError("t must lie in (0, 1)")
    p, s = params.p, params.sphere_area
    u_R = u_star(params, R, R)
    if t <= u_R:
        return -(p - 1.0) * scale**p * _ratio_power_mass(params, R, R) + params.beta * s * R ** (params.n - 1)
    rho = min(_radius_at_level(params, R, t), R)
    internal = s * rho ** (params.n - 1) * (scale * gradient_ratio(params, R, rho)) ** (p - 1.0)
    return internal - (p - 1.0) * scale**p * _ratio_power_mass(params, R, rho)


def h_star_radial(params: ProblemParams, R: float, t: float) -> float:
    """H for phi = |grad u*| / u* on (B_1, B_R); equals the ball energy for every level."""
    u_R = u_star(params, R, R)
    if not u_R < t < 1.0:
        raise ValueError(f"t must lie in (u*(R), 1) = ({u_R:.6g}, 1)")
    return h_radial(params, R, t)


def weighted_h_integral_radial(params: ProblemParams, R: float, scale: float = 1.0) -> float:
    """int_0^1 t^(p-1) (H(t, scale * g) - E) dt on (B_1, B_R), with g = |grad u*| / u*."""
    p = params.p
    E = ball_energy(params, R)
    u_R = u_star(params, R, R)
    low = (h_radial(params, R, 0.5 * u_R, scale) - E) * u_R**p / p

    def integrand(rho):
        # t = u*(rho), dt = -u*'(rho) drho = g(rho) u*(rho) drho
        t = u_star(params, R, rho)
        g = gradient_ratio(params, R, rho)
        internal = params.sphere_area * rho ** (params.n - 1) * (scale * g) ** (p - 1.0)
        h = internal - (p - 1.0) * scale**p * _ratio_power_mass(params, R, rho)
        return t ** (p - 1.0) * (h - E) * g * t

    high, _ = integrate.quad(integrand, 1.0, R, epsabs=1e-13 * E, epsrel=1e-11, limit=200)
    return low + high


# --------------------------------------------------------------------------
# derearrangement


def r_of_t(superlevel_volume: float, n: int) -> float:
    """Radius of the ball with the given volume."""
    if superlevel_volume < 0:
        raise ValueError("volume must be non-negative")
    return (superlevel_volume / unit_ball_volume(n)) ** (1.0 / n)


def _volume_table(solution: FemSolution, n_table: int = 2048):
    u = solution.values
    levels = np.linspace(float(u.min()), 1.0, n_table)
    vols = np.empty(n_table)
    mesh = solution.mesh
    for i, t in enumerate(levels):
        a, _, _ = kernels.clip_level(mesh.nodes, mesh.triangles, u, t)
        vols[i] = mesh.inner_area + a.sum()
    return levels, vols


def derearranged_phi(solution: FemSolution, params: ProblemParams, R_ref: float):
    """Transplant the radial ratio g = |grad u*| / u* on (B_1, B_R_ref) onto the mesh.

    Each triangle gets g(r(t)) with t its vertex-mean level and r(t) the
    volume radius of {u > t}. Returns ``(phi_tri, phi_level)`` where
    ``phi_level(geo)`` is the constant value g(r(t)) used on the level curve.
    """
    mesh = solution.mesh
    u = solution.values
    levels, vols = _volume_table(solution)

    def radius(t):
        v = np.interp(t, levels, vols)
        return np.sqrt(v / math.pi)

    clip_g = lemma5_predicate(params, R_ref)[0]

    def g_of_r(r):
        r = np.asarray(r, dtype=float)
        out_of_range = (r < 1.0 - 1e-3) | (r > R_ref * (1.0 + 1e-3))
        if np.any(out_of_range):
            logger.warning("%d volume radii outside [1, %.6g]; clamped", int(np.count_nonzero(out_of_range)), R_ref)
        g = gradient_ratio(params, R_ref, np.clip(r, 1.0, R_ref))
        return np.clip(g, 0.0, params.b) if clip_g else g

    t_tri = u[mesh.triangles].mean(axis=1)
    phi_tri = np.atleast_1d(g_of_r(radius(t_tri)))
    n_tri = len(mesh.triangles)

    def phi_level(geo: LevelSetGeometry):
        return np.full(n_tri, float(g_of_r(radius(geo.t))))

    return phi_tri, phi_level


# --------------------------------------------------------------------------
# scans


def lemma2_search(solution: FemSolution, params: ProblemParams, phi, phi_level: PhiLevel = None) -> tuple[float, float]:
    """Level minimizing H(t, phi) over the standard scan."""
    scan = h_scan(solution, params, phi, phi_level)
    best = min(scan, key=lambda h: h.h_value)
    return best.t, best.h_value


def weighted_h_integral(solution: FemSolution, params: ProblemParams, phi, phi_level: PhiLevel = None) -> float:
    """int_0^1 t^(p-1) (H(t, phi) - E) dt with E the solution's energy.

    Below the smallest outer trace U_t is the whole domain and H is constant,
    which is integrated exactly; the rest uses the trapezoid rule over the
    level scan.
    """
    p = params.p
    E = solution.energy_total
    u = solution.values
    t_lo = float(np.min(u[solution.mesh.outer_nodes]))
    t_min = float(np.min(u))
    t_full = 0.5 * t_min if t_min > 0 else 1e-12
    h_full = h_function(solution, t_full, phi, params, phi_level).h_value
    low = (h_full - E) * t_lo**p / p
    ts = np.concatenate([[t_lo], scan_levels(solution), [1.0 - 1e-9]])
    hs = np.array([h_function(solution, float(t), phi, params, phi_level).h_value for t in ts])
    ts[0] = t_lo
    return low + float(integrate.trapezoid(ts ** (p - 1.0) * (hs - E), ts))


def centroid_drift(solution: FemSolution) -> float:
    """Largest distance between the centroid of U_t and that of the mid-span level."""
    u = solution.values
    if solution.mesh is None or np.all(u >= 1.0):
        return 0.0
    levels = scan_levels(solution)
    t_mid = 0.5 * (float(np.min(u[solution.mesh.outer_nodes])) + 1.0)
    ref = extract_level_set(solution, t_mid).centroid
    return max(float(np.linalg.norm(extract_level_set(solution, float(t)).centroid - ref)) for t in levels)


def convexity_gap(a, b, p):
    """(p/(p-1)) a (a^(p-1) - b^(p-1)) - (a^p - b^p); non-negative for a, b >= 0."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    return p / (p - 1.0) * a * (a ** (p - 1.0) - b ** (p - 1.0)) - (a**p - b**p)
