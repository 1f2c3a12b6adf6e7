"""Structured triangulation of the annular region between K and Omega."""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .geometry import ShapePair

__all__ = ["AnnularMesh", "MeshError", "build_annular_mesh"]


class MeshError(ValueError):
    pass


def _readonly(a):
    a = np.ascontiguousarray(a)
    a.flags.writeable = False
    return a


@dataclass(frozen=True, eq=False)
class AnnularMesh:
    """P1 triangulation of Omega minus K.

    Node ``j * n_theta + i`` sits at angle index ``i`` on transfinite level
    ``j``; level 0 is the boundary of K and level ``n_radial`` the boundary
    of Omega.
    """

    nodes: np.ndarray
    triangles: np.ndarray
    inner_nodes: np.ndarray
    outer_edges: np.ndarray
    n_theta: int
    n_radial: int

    @cached_property
    def edge_lengths(self) -> np.ndarray:
        d = self.nodes[self.outer_edges[:, 1]] - self.nodes[self.outer_edges[:, 0]]
        return _readonly(np.hypot(d[:, 0], d[:, 1]))

    @cached_property
    def triangle_areas(self) -> np.ndarray:
        return _readonly(_signed_areas(self.nodes, self.triangles))

    @cached_property
    def shape_gradients(self) -> np.ndarray:
        """Constant gradients of the three barycentric basis functions, shape (T, 3, 2)."""
        x = self.nodes[self.triangles]
        x0, x1, x2 = x[:, 0], x[:, 1], x[:, 2]
        two_a = 2.0 * self.triangle_areas
        g = np.empty((len(self.triangles), 3, 2))
        for k, (p, q) in enumerate(((x1, x2), (x2, x0), (x0, x1))):
            g[:, k, 0] = (p[:, 1] - q[:, 1]) / two_a
            g[:, k, 1] = (q[:, 0] - p[:, 0]) / two_a
        return _readonly(g)

    @cached_property
    def free_mask(self) -> np.ndarray:
        m = np.ones(len(self.nodes), dtype=bool)
        m[self.inner_nodes] = False
        return _readonly(m)

    @cached_property
    def levels(self) -> np.ndarray:
        """Transfinite coordinate s of every node."""
        return _readonly(np.repeat(np.arange(self.n_radial + 1) / self.n_radial, self.n_theta))

    @property
    def outer_nodes(self) -> np.ndarray:
        return self.outer_edges[:, 0]

    @cached_property
    def inner_area(self) -> float:
        """Area enclosed by the inner polygon (the meshed copy of K)."""
        return _polygon_area(self.nodes[self.inner_nodes])

    @cached_property
    def inner_centroid(self) -> np.ndarray:
        return _polygon_centroid(self.nodes[self.inner_nodes])

    @property
    def h(self) -> float:
        """Longest triangle edge."""
        x = self.nodes[self.triangles]
        e = np.concatenate([x[:, 1] - x[:, 0], x[:, 2] - x[:, 1], x[:, 0] - x[:, 2]])
        return float(np.max(np.hypot(e[:, 0], e[:, 1])))

    def euler_characteristic(self) -> int:
        t = self.triangles
        e = np.sort(np.concatenate([t[:, [0, 1]], t[:, [1, 2]], t[:, [2, 0]]]), axis=1)
        n_edges = len(np.unique(e, axis=0))
        return len(self.nodes) - n_edges + len(t)


def _signed_areas(nodes, tris):
    x = nodes[tris]
    d1 = x[:, 1] - x[:, 0]
    d2 = x[:, 2] - x[:, 0]
    return 0.5 * (d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0])


def _polygon_area(pts):
    x, y = pts[:, 0], pts[:, 1]
    return 0.5 * float(np.sum(x * np.roll(y, -1) - np.roll(x, -1) * y))


def _polygon_centroid(pts):
    x, y = pts[:, 0], pts[:, 1]
    xn, yn = np.roll(x, -1), np.roll(y, -1)
    cr = x * yn - xn * y
    a = 0.5 * cr.sum()
    return np.array([((x + xn) * cr).sum(), ((y + yn) * cr).sum()]) / (6.0 * a)


def build_annular_mesh(pair: ShapePair, n_theta: int, n_radial: int) -> AnnularMesh:
    if pair.degenerate:
        raise MeshError("K equals Omega: nothing to mesh")
    if n_theta < 16 or n_radial < 2:
        raise MeshError("need n_theta >= 16 and n_radial >= 2")
    theta = 2.0 * np.pi * np.arange(n_theta) / n_theta
    inner = pair.K.point(theta)
    c = np.asarray(pair.K.center)
    rho_o = pair.omega_radius_about_k(theta)
    outer = c + rho_o[:, None] * np.stack([np.cos(theta), np.sin(theta)], axis=-1)
    s = np.arange(n_radial + 1) / n_radial
    nodes = (1.0 - s)[:, None, None] * inner[None] + s[:, None, None] * outer[None]
    nodes = nodes.reshape(-1, 2)
    # exact endpoints so that level 0 and level n_radial lie on the curves
    nodes[:n_theta] = inner
    nodes[-n_theta:] = outer

    i = np.arange(n_theta)
    ip = (i + 1) % n_theta
    tris = []
    for j in range(n_radial):
        a = j * n_theta + i
        b = j * n_theta + ip
        cc = (j + 1) * n_theta + ip
        d = (j + 1) * n_theta + i
        d_ac = np.linalg.norm(nodes[a] - nodes[cc], axis=1)
        d_bd = np.linalg.norm(nodes[b] - nodes[d], axis=1)
        use_ac = d_ac <= d_bd
        t1 = np.where(use_ac[:, None], np.stack([a, b, cc], 1), np.stack([a, b, d], 1))
        t2 = np.where(use_ac[:, None], np.stack([a, cc, d], 1), np.stack([b, cc, d], 1))
        tris.append(t1)
        tris.append(t2)
    tris = np.concatenate(tris).astype(np.int64)
    sa = _signed_areas(nodes, tris)
    flip = sa < 0
    tris[flip] = tris[flip][:, [0, 2, 1]]
    span = np.ptp(nodes, axis=0).max()
    if np.any(np.abs(sa) <= 1e-14 * span * span):
        raise MeshError("degenerate triangle; increase resolution or reduce shape oscillation")
    # a folded quad shows up as a sign mismatch with the majority orientation
    if np.any(flip) and not np.all(flip):
        n_bad = int(min(flip.sum(), (~flip).sum()))
        raise MeshError(f"{n_bad} inverted triangles; transfinite map is not one-to-one")

    outer_ids = n_radial * n_theta + i
    outer_edges = np.stack([outer_ids, n_radial * n_theta + ip], axis=1)
    mesh = AnnularMesh(
        nodes=_readonly(nodes),
        triangles=_readonly(tris),
        inner_nodes=_readonly(i.astype(np.int64)),
        outer_edges=_readonly(outer_edges.astype(np.int64)),
        n_theta=n_theta,
        n_radial=n_radial,
    )
    if not math.isclose(abs(float(mesh.triangle_areas.sum())), abs(_polygon_area(outer) - _polygon_area(inner)), rel_tol=1e-9):
        raise MeshError("triangles do not tile the annulus")
    return mesh
