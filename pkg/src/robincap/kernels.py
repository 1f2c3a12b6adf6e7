"""Hot loops: P1 energy/gradient assembly and triangle clipping at a level.

Each kernel has a numba loop version (``*_nb``) and a vectorized numpy
version (``*_np``). The public names dispatch according to
:data:`robincap._accel.USE_NUMBA`. Both versions sum in a fixed order, so a
given backend is bitwise reproducible.
"""

import numpy as np

from ._accel import USE_NUMBA, njit

__all__ = ["energy_and_gradient", "boundary_flux", "clip_level", "gauss_legendre_unit"]


def gauss_legendre_unit(order):
    """Gauss-Legendre nodes and weights on [0, 1]."""
    x, w = np.polynomial.legendre.leggauss(order)
    return 0.5 * (x + 1.0), 0.5 * w


# --------------------------------------------------------------------------
# energy and gradient


@njit
def _energy_grad_nb(values, tris, areas, grads, edges, lengths, xi, wq, p, beta, eps2, out_grad):
    out_grad[:] = 0.0
    e_bulk = 0.0
    half_p = 0.5 * p
    for t in range(tris.shape[0]):
        i0, i1, i2 = tris[t, 0], tris[t, 1], tris[t, 2]
        gx = values[i0] * grads[t, 0, 0] + values[i1] * grads[t, 1, 0] + values[i2] * grads[t, 2, 0]
        gy = values[i0] * grads[t, 0, 1] + values[i1] * grads[t, 1, 1] + values[i2] * grads[t, 2, 1]
        q = gx * gx + gy * gy + eps2
        e_bulk += areas[t] * q**half_p
        if q == 0.0:
            continue
        c = p * areas[t] * q ** (half_p - 1.0)
        for k in range(3):
            out_grad[tris[t, k]] += c * (gx * grads[t, k, 0] + gy * grads[t, k, 1])
    e_bnd = 0.0
    for e in range(edges.shape[0]):
        a, b = edges[e, 0], edges[e, 1]
        va, vb = values[a], values[b]
        acc = 0.0
        da = 0.0
        db = 0.0
        for k in range(xi.shape[0]):
            v = (1.0 - xi[k]) * va + xi[k] * vb
            av = abs(v)
            acc += wq[k] * av**p
            dv = wq[k] * p * av ** (p - 1.0) * (1.0 if v > 0 else (-1.0 if v < 0 else 0.0))
            da += dv * (1.0 - xi[k])
            db += dv * xi[k]
        e_bnd += lengths[e] * acc
        out_grad[a] += beta * lengths[e] * da
        out_grad[b] += beta * lengths[e] * db
    return e_bulk, beta * e_bnd


def _energy_grad_np(values, tris, areas, grads, edges, lengths, xi, wq, p, beta, eps2, out_grad):
    n = values.shape[0]
    vt = values[tris]
    g = np.einsum("tk,tkd->td", vt, grads)
    q = g[:, 0] ** 2 + g[:, 1] ** 2 + eps2
    e_bulk = float(np.sum(areas * q ** (0.5 * p)))
    with np.errstate(divide="ignore"):
        c = np.where(q > 0.0, p * areas * q ** (0.5 * p - 1.0), 0.0)
    contrib = c[:, None] * np.einsum("td,tkd->tk", g, grads)
    out_grad[:] = np.bincount(tris.ravel(), weights=contrib.ravel(), minlength=n)
    va = values[edges[:, 0]][:, None]
    vb = values[edges[:, 1]][:, None]
    v = (1.0 - xi)[None, :] * va + xi[None, :] * vb
    av = np.abs(v)
    e_bnd = float(np.sum(lengths * (av**p @ wq)))
    dv = wq[None, :] * p * av ** (p - 1.0) * np.sign(v)
    da = beta * lengths * (dv @ (1.0 - xi))
    db = beta * lengths * (dv @ xi)
    out_grad += np.bincount(edges[:, 0], weights=da, minlength=n)
    out_grad += np.bincount(edges[:, 1], weights=db, minlength=n)
    return e_bulk, beta * e_bnd


@njit
def _boundary_flux_nb(values, edges, lengths, xi, wq, power):
    acc = 0.0
    for e in range(edges.shape[0]):
        va, vb = values[edges[e, 0]], values[edges[e, 1]]
        s = 0.0
        for k in range(xi.shape[0]):
            s += wq[k] * abs((1.0 - xi[k]) * va + xi[k] * vb) ** power
        acc += lengths[e] * s
    return acc


def _boundary_flux_np(values, edges, lengths, xi, wq, power):
    v = (1.0 - xi)[None, :] * values[edges[:, 0]][:, None] + xi[None, :] * values[edges[:, 1]][:, None]
    return float(np.sum(lengths * (np.abs(v) ** power @ wq)))


# --------------------------------------------------------------------------
# clipping triangles against {u > t}


@njit
def _clip_level_nb(nodes, tris, values, t, areas_out, moment_out, seg_out):
    """Per-triangle area, first moment and level segment of {u > t}."""
    for k in range(tris.shape[0]):
        i0, i1, i2 = tris[k, 0], tris[k, 1], tris[k, 2]
        u = (values[i0], values[i1], values[i2])
        x = (nodes[i0, 0], nodes[i1, 0], nodes[i2, 0])
        y = (nodes[i0, 1], nodes[i1, 1], nodes[i2, 1])
        full = 0.5 * ((x[1] - x[0]) * (y[2] - y[0]) - (y[1] - y[0]) * (x[2] - x[0]))
        cx = (x[0] + x[1] + x[2]) / 3.0
        cy = (y[0] + y[1] + y[2]) / 3.0
        n_above = 0
        for j in range(3):
            if u[j] > t:
                n_above += 1
        seg_out[k, 0, 0] = np.nan
        seg_out[k, 0, 1] = np.nan
        seg_out[k, 1, 0] = np.nan
        seg_out[k, 1, 1] = np.nan
        if n_above == 0:
            areas_out[k] = 0.0
            moment_out[k, 0] = 0.0
            moment_out[k, 1] = 0.0
            continue
        if n_above == 3:
            areas_out[k] = full
            moment_out[k, 0] = full * cx
            moment_out[k, 1] = full * cy
            continue
        # lone vertex: the one on the minority side
        lone = 0
        for j in range(3):
            if (u[j] > t) == (n_above == 1):
                lone = j
        j1 = (lone + 1) % 3
        j2 = (lone + 2) % 3
        l1 = (u[lone] - t) / (u[lone] - u[j1])
        l2 = (u[lone] - t) / (u[lone] - u[j2])
        p1x = x[lone] + l1 * (x[j1] - x[lone])
        p1y = y[lone] + l1 * (y[j1] - y[lone])
        p2x = x[lone] + l2 * (x[j2] - x[lone])
        p2y = y[lone] + l2 * (y[j2] - y[lone])
        small = full * l1 * l2
        scx = (x[lone] + p1x + p2x) / 3.0
        scy = (y[lone] + p1y + p2y) / 3.0
        if n_above == 1:
            areas_out[k] = small
            moment_out[k, 0] = small * scx
            moment_out[k, 1] = small * scy
        else:
            areas_out[k] = full - small
            moment_out[k, 0] = full * cx - small * scx
            moment_out[k, 1] = full * cy - small * scy
        seg_out[k, 0, 0] = p1x
        seg_out[k, 0, 1] = p1y
        seg_out[k, 1, 0] = p2x
        seg_out[k, 1, 1] = p2y


def _clip_level_np(nodes, tris, values, t, areas_out, moment_out, seg_out):
    u = values[tris]
    x = nodes[tris]
    d1 = x[:, 1] - x[:, 0]
    d2 = x[:, 2] - x[:, 0]
    full = 0.5 * (d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0])
    c = x.mean(axis=1)
    above = u > t
    n_above = above.sum(axis=1)
    areas_out[:] = np.where(n_above == 3, full, 0.0)
    moment_out[:] = np.where((n_above == 3)[:, None], full[:, None] * c, 0.0)
    seg_out[:] = np.nan
    cut = (n_above == 1) | (n_above == 2)
    if not np.any(cut):
        return
    idx = np.nonzero(cut)[0]
    ua, xa, na = u[idx], x[idx], n_above[idx]
    minority = above[idx] == (na == 1)[:, None]
    lone = 2 - np.argmax(minority[:, ::-1], axis=1)  # last minority vertex, as in the loop version
    r = np.arange(len(idx))
    j1 = (lone + 1) % 3
    j2 = (lone + 2) % 3
    ul, u1, u2 = ua[r, lone], ua[r, j1], ua[r, j2]
    xl, x1, x2 = xa[r, lone], xa[r, j1], xa[r, j2]
    l1 = (ul - t) / (ul - u1)
    l2 = (ul - t) / (ul - u2)
    p1 = xl + l1[:, None] * (x1 - xl)
    p2 = xl + l2[:, None] * (x2 - xl)
    small = full[idx] * l1 * l2
    sc = (xl + p1 + p2) / 3.0
    one = na == 1
    areas_out[idx] = np.where(one, small, full[idx] - small)
    moment_out[idx] = np.where(
        one[:, None], small[:, None] * sc, full[idx][:, None] * c[idx] - small[:, None] * sc
    )
    seg_out[idx, 0] = p1
    seg_out[idx, 1] = p2


if USE_NUMBA:
    _energy_grad = _energy_grad_nb
    _boundary_flux = _boundary_flux_nb
    _clip_level = _clip_level_nb
else:
    _energy_grad = _energy_grad_np
    _boundary_flux = _boundary_flux_np
    _clip_level = _clip_level_np


def energy_and_gradient(values, tris, areas, grads, edges, lengths, xi, wq, p, beta, eps2, out_grad):
    """Return ``(bulk, boundary)`` energy parts and write the full nodal gradient into ``out_grad``."""
    return _energy_grad(values, tris, areas, grads, edges, lengths, xi, wq, float(p), float(beta), float(eps2), out_grad)


def boundary_flux(values, edges, lengths, xi, wq, power):
    """Integral of |v|**power over the outer boundary (v linear per edge)."""
    return _boundary_flux(values, edges, lengths, xi, wq, float(power))


def clip_level(nodes, tris, values, t):
    """Per-triangle area, first moment and level segment of the superlevel set {u > t}."""
    m = tris.shape[0]
    areas = np.empty(m)
    moments = np.empty((m, 2))
    segs = np.empty((m, 2, 2))
    _clip_level(nodes, tris, values, float(t), areas, moments, segs)
    return areas, moments, segs
