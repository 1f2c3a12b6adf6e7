"""Discrete minimization of the Robin p-energy on an annular P1 mesh.

The functional is

    J(v) = sum_T |T| (|grad v|_T^2 + eps^2)^(p/2) + beta * int_{outer} |v|^p

with v = 1 on the inner boundary. It is minimized by preconditioned
gradient descent: two-point (Barzilai-Borwein) step estimates safeguarded by
an Armijo backtracking line search, with continuation in eps. The reported
energies are always re-evaluated at eps = 0.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import factorized

from . import kernels
from .geometry import ShapePair, perimeter
from .mesh import AnnularMesh, build_annular_mesh
from .radial import ProblemParams, ball_energy, u_star

logger = logging.getLogger(__name__)

__all__ = [
    "SolveOptions",
    "FemSolution",
    "SolverError",
    "discrete_energy",
    "discrete_gradient",
    "solve",
    "solve_pair",
    "robin_identity_check",
    "convergence_study",
    "radial_interpolant",
    "solution_from_values",
]


class SolverError(RuntimeError):
    pass


_ENERGY_RESOLUTION = 1e-14


@dataclass(frozen=True)
class SolveOptions:
    epsilon_schedule: tuple[float, ...] = (1e-2, 1e-4, 1e-6, 1e-8)
    gradient_tolerance: float = 1e-10
    max_iterations: int = 5000
    quadrature_order_boundary: int = 4
    precondition: bool = True
    record_trace: bool = False

    def __post_init__(self):
        sched = tuple(float(e) for e in self.epsilon_schedule)
        if not sched or any(e <= 0 for e in sched) or any(b >= a for a, b in zip(sched, sched[1:])):
            raise ValueError("epsilon_schedule must be strictly decreasing and positive")
        object.__setattr__(self, "epsilon_schedule", sched)


@dataclass
class FemSolution:
    mesh: AnnularMesh | None
    values: np.ndarray
    energy_total: float
    energy_gradient_part: float
    energy_boundary_part: float
    robin_flux: float
    iterations: int
    final_gradient_norm: float
    epsilon_final: float
    converged: bool = True
    max_before_clamp: float = 1.0
    energy_trace: list[float] = field(default_factory=list, repr=False)


def _require_plane(params: ProblemParams):
    if params.n != 2:
        raise ValueError("the finite-element solver works in the plane only (n = 2)")


def _check_values(mesh: AnnularMesh, values):
    values = np.asarray(values, dtype=float)
    if values.shape != (len(mesh.nodes),):
        raise ValueError(f"expected {len(mesh.nodes)} nodal values, got shape {values.shape}")
    return values


def _energy_parts(mesh, values, params, epsilon, order=4, grad_out=None):
    xi, wq = kernels.gauss_legendre_unit(order)
    if grad_out is None:
        grad_out = np.empty(len(mesh.nodes))
    bulk, bnd = kernels.energy_and_gradient(
        values,
        mesh.triangles,
        mesh.triangle_areas,
        mesh.shape_gradients,
        mesh.outer_edges,
        mesh.edge_lengths,
        xi,
        wq,
        params.p,
        params.beta,
        epsilon * epsilon,
        grad_out,
    )
    return bulk, bnd, grad_out


def discrete_energy(mesh: AnnularMesh, values, params: ProblemParams, epsilon: float = 0.0, order: int = 4) -> float:
    _require_plane(params)
    values = _check_values(mesh, values)
    bulk, bnd, _ = _energy_parts(mesh, values, params, epsilon, order)
    return bulk + bnd


def discrete_gradient(mesh: AnnularMesh, values, params: ProblemParams, epsilon: float = 0.0, order: int = 4) -> np.ndarray:
    """Gradient of :func:`discrete_energy` in the free nodal values; inner entries are 0."""
    _require_plane(params)
    values = _check_values(mesh, values)
    _, _, g = _energy_parts(mesh, values, params, epsilon, order)
    g[mesh.inner_nodes] = 0.0
    return g


def _stiffness_preconditioner(mesh: AnnularMesh, params: ProblemParams):
    """Factorized p=2 operator 2*(stiffness + beta * boundary mass) on free nodes."""
    n = len(mesh.nodes)
    G = mesh.shape_gradients
    local = np.einsum("tad,tbd->tab", G, G) * mesh.triangle_areas[:, None, None]
    rows = np.repeat(mesh.triangles, 3, axis=1).ravel()
    cols = np.tile(mesh.triangles, (1, 3)).ravel()
    A = sp.coo_matrix((local.ravel(), (rows, cols)), shape=(n, n))
    e, L = mesh.outer_edges, mesh.edge_lengths * params.beta
    mrows = np.concatenate([e[:, 0], e[:, 1], e[:, 0], e[:, 1]])
    mcols = np.concatenate([e[:, 0], e[:, 1], e[:, 1], e[:, 0]])
    mvals = np.concatenate([L / 3.0, L / 3.0, L / 6.0, L / 6.0])
    A = (A + sp.coo_matrix((mvals, (mrows, mcols)), shape=(n, n))).tocsr() * 2.0
    free = np.nonzero(mesh.free_mask)[0]
    Af = A[free][:, free].tocsc()
    return Af, factorized(Af)


def initial_guess(mesh: AnnularMesh, params: ProblemParams) -> np.ndarray:
    """Linear blend in the transfinite coordinate, from 1 on K to a radial estimate on Omega."""
    outer_area = abs(mesh.inner_area + float(mesh.triangle_areas.sum()))
    ratio = math.sqrt(outer_area / mesh.inner_area)
    u_out = u_star(params, ratio, ratio) if ratio > 1.0 + 1e-9 else 1.0
    return 1.0 - mesh.levels * (1.0 - u_out)


def solve(mesh: AnnularMesh, params: ProblemParams, options: SolveOptions | None = None, x0=None) -> FemSolution:
    """Minimize the discrete energy; always returns the best iterate found.

    ``converged`` is False when some stage hit ``max_iterations`` without
    reaching the gradient tolerance.
    """
    _require_plane(params)
    opts = options or SolveOptions()
    order = opts.quadrature_order_boundary
    free = np.nonzero(mesh.free_mask)[0]
    x = initial_guess(mesh, params) if x0 is None else _check_values(mesh, x0).copy()
    x[mesh.inner_nodes] = 1.0

    if opts.precondition:
        P, P_solve = _stiffness_preconditioner(mesh, params)
    else:
        P, P_solve = None, None

    grad_buf = np.empty(len(mesh.nodes))
    trace: list[float] = []
    total_iters = 0
    converged = True
    g_ref = None
    gnorm = math.inf
    eps = opts.epsilon_schedule[0]

    def evaluate(vals, eps):
        bulk, bnd, g = _energy_parts(mesh, vals, params, eps, order, grad_buf)
        return bulk + bnd, g[free].copy()

    for eps in opts.epsilon_schedule:
        E, g = evaluate(x, eps)
        if not math.isfinite(E):
            raise SolverError("non-finite energy")
        gnorm = float(np.linalg.norm(g))
        if g_ref is None:
            g_ref = max(gnorm, 1e-300)
        step = 1.0
        stage_ok = False
        for _ in range(opts.max_iterations):
            if gnorm <= opts.gradient_tolerance * g_ref:
                stage_ok = True
                break
            d = -P_solve(g) if P_solve is not None else -g
            slope = float(g @ d)
            if slope >= 0.0:
                # preconditioned direction lost descent to rounding
                d = -g
                slope = -gnorm * gnorm
            if -slope <= _ENERGY_RESOLUTION * abs(E):
                # remaining decrease is below what the energy can resolve
                stage_ok = True
                break
            alpha = step
            accepted = False
            for _ in range(60):
                xn = x.copy()
                xn[free] += alpha * d
                En, gn = evaluate(xn, eps)
                if not math.isfinite(En):
                    alpha *= 0.5
                    continue
                if En <= E + 1e-4 * alpha * slope:
                    accepted = True
                    break
                alpha *= 0.5
            total_iters += 1
            if not accepted:
                # no decrease representable in floating point: at the floor
                stage_ok = True
                break
            if En > E:
                raise SolverError("accepted step increased the energy")
            s = alpha * d
            y = gn - g
            sy = float(s @ y)
            sPs = float(s @ (P @ s)) if P is not None else float(s @ s)
            step = sPs / sy if sy > 0.0 else 2.0 * alpha
            step = min(max(step, 1e-12), 1e12)
            x, E, g = xn, En, gn
            gnorm = float(np.linalg.norm(g))
            if opts.record_trace:
                trace.append(E)
        else:
            stage_ok = gnorm <= opts.gradient_tolerance * g_ref
        if not stage_ok:
            converged = False
            logger.warning("stage eps=%g stopped at max_iterations (|g|/|g0|=%.3e)", eps, gnorm / g_ref)

    max_before = float(np.max(x))
    x = np.clip(x, 0.0, 1.0)
    x[mesh.inner_nodes] = 1.0
    sol = solution_from_values(mesh, x, params, order)
    sol.iterations = total_iters
    sol.final_gradient_norm = gnorm
    sol.epsilon_final = eps
    sol.converged = converged
    sol.max_before_clamp = max_before
    sol.energy_trace = trace
    return sol


def solution_from_values(mesh: AnnularMesh, values, params: ProblemParams, order: int = 4) -> FemSolution:
    """Wrap a nodal field (e.g. an interpolant) as a solution with eps = 0 energies."""
    values = _check_values(mesh, values)
    bulk, bnd, _ = _energy_parts(mesh, values, params, 0.0, order)
    xi, wq = kernels.gauss_legendre_unit(order)
    flux = params.beta * kernels.boundary_flux(values, mesh.outer_edges, mesh.edge_lengths, xi, wq, params.p - 1.0)
    return FemSolution(
        mesh=mesh,
        values=values,
        energy_total=bulk + bnd,
        energy_gradient_part=bulk,
        energy_boundary_part=bnd,
        robin_flux=flux,
        iterations=0,
        final_gradient_norm=float("nan"),
        epsilon_final=0.0,
    )


def solve_pair(pair: ShapePair, params: ProblemParams, n_theta: int = 256, n_radial: int = 32, options: SolveOptions | None = None) -> FemSolution:
    """Mesh and solve, handling K = Omega without a mesh."""
    _require_plane(params)
    if pair.degenerate:
        e = params.beta * perimeter(pair.Omega)
        return FemSolution(None, np.ones(0), e, 0.0, e, e, 0, 0.0, 0.0)
    mesh = build_annular_mesh(pair, n_theta, n_radial)
    return solve(mesh, params, options)


def robin_identity_check(solution: FemSolution, params: ProblemParams) -> tuple[float, float]:
    """``(energy_total, beta * int u^(p-1))``; equal for an exact minimizer."""
    if not solution.converged:
        logger.warning("robin identity evaluated on an unconverged solution")
    return solution.energy_total, solution.robin_flux


def radial_interpolant(mesh: AnnularMesh, params: ProblemParams, R: float, center=(0.0, 0.0)) -> np.ndarray:
    """Nodal interpolant of the radial minimizer on (B_1, B_R)."""
    r = np.hypot(mesh.nodes[:, 0] - center[0], mesh.nodes[:, 1] - center[1])
    return np.asarray(u_star(params, R, np.clip(r, 0.0, R)), dtype=float)


def convergence_study(pair: ShapePair, params: ProblemParams, mesh_levels, oracle: float | None = None, options=None):
    """Energies over a sequence of meshes.

    Returns a list of dicts with keys ``n_theta, n_radial, h, energy, error``
    and ``order`` (observed order relative to the previous level). The error
    is against ``oracle`` when given, else against the finest level.
    """
    rows = []
    for n_theta, n_radial in mesh_levels:
        mesh = build_annular_mesh(pair, n_theta, n_radial)
        sol = solve(mesh, params, options)
        rows.append({"n_theta": n_theta, "n_radial": n_radial, "h": mesh.h, "energy": sol.energy_total})
    if len(rows) < 2 and oracle is None:
        for r in rows:
            r["error"] = None
            r["order"] = None
        return rows
    ref = oracle if oracle is not None else rows[-1]["energy"]
    prev = None
    for r in rows:
        r["error"] = abs(r["energy"] - ref)
        r["order"] = None
        if prev is not None and prev["error"] > 0 and r["error"] > 0:
            r["order"] = math.log(prev["error"] / r["error"]) / math.log(prev["h"] / r["h"])
        prev = r
    return rows


