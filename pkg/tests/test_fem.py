import math

import numpy as np
import pytest

from robincap.fem import (
    SolveOptions,
    convergence_study,
    discrete_energy,
    discrete_gradient,
    radial_interpolant,
    robin_identity_check,
    solution_from_values,
    solve,
    solve_pair,
)
from robincap.geometry import circle, perimeter, validate_pair
from robincap.mesh import build_annular_mesh
from robincap.radial import ProblemParams, ball_energy

P2 = ProblemParams(2, 2.0, 1.0)


@pytest.fixture(scope="module")
def tiny_mesh():
    K = circle(1.0)
    from robincap.geometry import StarShape

    Om = StarShape((0.1, 0.0), 2.0, [0.0, 0.1], [0.05])
    return build_annular_mesh(validate_pair(K, Om), 16, 3)


def test_energy_of_constant_one(mesh_64):
    v = np.ones(len(mesh_64.nodes))
    e = discrete_energy(mesh_64, v, ProblemParams(2, 3.0, 1.7))
    assert e == pytest.approx(1.7 * mesh_64.edge_lengths.sum(), rel=1e-13)
    assert mesh_64.edge_lengths.sum() == pytest.approx(perimeter(circle(2.0)), rel=2e-3)


def test_energy_regularization_adds_area(mesh_64):
    v = np.ones(len(mesh_64.nodes))
    e0 = discrete_energy(mesh_64, v, P2, 0.0)
    e1 = discrete_energy(mesh_64, v, P2, 0.1)
    assert e1 - e0 == pytest.approx(0.01 * mesh_64.triangle_areas.sum(), rel=1e-12)


def test_interpolant_energy_near_closed_form(mesh_256):
    v = radial_interpolant(mesh_256, P2, 2.0)
    e = discrete_energy(mesh_256, v, P2)
    assert e == pytest.approx(2 * math.pi / (0.5 + math.log(2)), rel=1e-2)


def test_energy_shape_mismatch(mesh_64):
    with pytest.raises(ValueError):
        discrete_energy(mesh_64, np.ones(5), P2)


def test_requires_plane(mesh_64):
    with pytest.raises(ValueError):
        discrete_energy(mesh_64, np.ones(len(mesh_64.nodes)), ProblemParams(3, 2.0, 1.0))


def test_gradient_sign_for_constant_one(mesh_64):
    g = discrete_gradient(mesh_64, np.ones(len(mesh_64.nodes)), P2)
    outer = mesh_64.outer_nodes
    interior = np.setdiff1d(np.nonzero(mesh_64.free_mask)[0], outer)
    assert np.all(g[mesh_64.inner_nodes] == 0.0)
    assert np.allclose(g[interior], 0.0, atol=1e-12)
    assert np.all(g[outer] > 0.0)


@pytest.mark.parametrize("state", range(20))
def test_gradient_matches_finite_differences(tiny_mesh, state):
    rng = np.random.default_rng(state)
    p = [1.5, 2.0, 2.5, 3.0, 4.0][state % 5]
    params = ProblemParams(2, p, rng.uniform(0.5, 2.0))
    eps = 1e-2
    v = rng.uniform(0.2, 1.0, len(tiny_mesh.nodes))
    v[tiny_mesh.inner_nodes] = 1.0
    g = discrete_gradient(tiny_mesh, v, params, eps)
    h = 1e-6
    fd = np.zeros_like(g)
    for i in np.nonzero(tiny_mesh.free_mask)[0]:
        vp, vm = v.copy(), v.copy()
        vp[i] += h
        vm[i] -= h
        fd[i] = (discrete_energy(tiny_mesh, vp, params, eps) - discrete_energy(tiny_mesh, vm, params, eps)) / (2 * h)
    assert np.linalg.norm(g - fd) <= 1e-6 * np.linalg.norm(fd)


def test_solve_p2_matches_closed_form(solution_256):
    exact = ball_energy(P2, 2.0)
    assert exact == pytest.approx(2 * math.pi / (0.5 + math.log(2)), rel=1e-12)
    assert solution_256.energy_total == pytest.approx(exact, rel=1e-2)
    assert solution_256.energy_total >= exact * (1 - 5e-3)
    assert solution_256.converged


def test_solution_invariants(solution_256):
    s = solution_256
    assert s.energy_total == pytest.approx(s.energy_gradient_part + s.energy_boundary_part, rel=1e-15)
    assert np.all(s.values[s.mesh.inner_nodes] == 1.0)
    assert np.all((s.values >= 0) & (s.values <= 1))
    assert s.epsilon_final == 1e-8


def test_maximum_principle(solution_256):
    s = solution_256
    assert s.max_before_clamp <= 1 + 1e-12
    assert s.values.min() >= s.values[s.mesh.outer_nodes].min() - 1e-12


def test_solve_p3(concentric_pair):
    params = ProblemParams(2, 3.0, 1.0)
    sol = solve_pair(concentric_pair, params, 128, 16)
    assert sol.energy_total == pytest.approx(ball_energy(params, 2.0), rel=2e-2)


def test_degenerate_pair_uses_perimeter():
    pair = validate_pair(circle(1.5), circle(1.5))
    sol = solve_pair(pair, ProblemParams(2, 2.5, 0.7))
    assert sol.energy_total == pytest.approx(0.7 * 3 * math.pi, rel=1e-14)
    assert sol.mesh is None


def test_energy_trace_monotone(mesh_64):
    sol = solve(mesh_64, ProblemParams(2, 1.6, 1.0), SolveOptions(epsilon_schedule=(1e-3,), record_trace=True))
    tr = np.array(sol.energy_trace)
    assert len(tr) > 1
    assert np.all(np.diff(tr) <= 0.0)


def test_solve_is_deterministic(mesh_64):
    a = solve(mesh_64, ProblemParams(2, 2.5, 1.0))
    b = solve(mesh_64, ProblemParams(2, 2.5, 1.0))
    assert np.array_equal(a.values, b.values)
    assert a.energy_total == b.energy_total


def test_energy_nondecreasing_in_beta(mesh_64):
    e = [solve(mesh_64, ProblemParams(2, 2.0, beta)).energy_total for beta in (0.5, 1.0, 2.0)]
    assert e[0] <= e[1] <= e[2]


def test_unconverged_flag(mesh_64):
    sol = solve(mesh_64, ProblemParams(2, 3.0, 1.0), SolveOptions(epsilon_schedule=(1e-2,), max_iterations=1,
                                                                 precondition=False))
    assert not sol.converged


def test_options_validation():
    with pytest.raises(ValueError):
        SolveOptions(epsilon_schedule=(1e-4, 1e-2))
    with pytest.raises(ValueError):
        SolveOptions(epsilon_schedule=())


def test_robin_identity_for_constant_one(mesh_64):
    sol = solution_from_values(mesh_64, np.ones(len(mesh_64.nodes)), P2)
    lhs, rhs = robin_identity_check(sol, P2)
    assert lhs == pytest.approx(rhs, rel=1e-14)


def test_robin_identity_at_fine_mesh(solution_256):
    lhs, rhs = robin_identity_check(solution_256, P2)
    assert abs(lhs - rhs) <= 1e-2 * lhs


def test_robin_identity_interpolant_refines(concentric_pair):
    gaps = []
    for m, k in ((32, 4), (256, 32)):
        mesh = build_annular_mesh(concentric_pair, m, k)
        sol = solution_from_values(mesh, radial_interpolant(mesh, P2, 2.0), P2)
        lhs, rhs = robin_identity_check(sol, P2)
        gaps.append(abs(lhs - rhs) / lhs)
    assert gaps[1] < 1e-2
    assert gaps[0] > gaps[1]


def test_convergence_study(concentric_pair):
    exact = ball_energy(P2, 2.0)
    rows = convergence_study(concentric_pair, P2, [(32, 4), (64, 8), (128, 16)], oracle=exact)
    errs = [r["error"] for r in rows]
    assert errs[0] > errs[1] > errs[2]
    assert rows[-1]["order"] >= 1.5
    assert all(r["energy"] >= exact * (1 - 5e-3) for r in rows)
    energies = [r["energy"] for r in rows]
    assert energies[0] > energies[1] > energies[2]


def test_convergence_study_single_level(concentric_pair):
    rows = convergence_study(concentric_pair, P2, [(32, 4)])
    assert rows[0]["error"] is None
