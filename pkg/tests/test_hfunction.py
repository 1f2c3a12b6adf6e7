import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from robincap.fem import radial_interpolant, solution_from_values, solve_pair
from robincap.geometry import circle, validate_pair
from robincap.hfunction import (
    _ratio_power_mass,
    centroid_drift,
    convexity_gap,
    derearranged_phi,
    extract_level_set,
    h_function,
    h_radial,
    h_scan,
    h_star_radial,
    lemma2_search,
    r_of_t,
    scan_levels,
    solution_ratio_phi,
    weighted_h_integral,
    weighted_h_integral_radial,
)
from robincap.mesh import build_annular_mesh
from robincap.radial import ProblemParams, ball_energy, gradient_ratio, u_star, unit_ball_volume

P2 = ProblemParams(2, 2.0, 1.0)


@pytest.fixture(scope="module")
def interp_256(mesh_256):
    return solution_from_values(mesh_256, radial_interpolant(mesh_256, P2, 2.0), P2)


def test_level_set_of_interpolant(interp_256):
    geo = extract_level_set(interp_256, u_star(P2, 2.0, 1.5))
    assert geo.internal_length == pytest.approx(2 * math.pi * 1.5, rel=1e-2)
    assert geo.superlevel_area == pytest.approx(math.pi * 2.25, rel=1e-2)
    assert geo.external_length == 0.0
    np.testing.assert_allclose(geo.centroid, 0.0, atol=1e-10)


def test_level_below_minimum(interp_256):
    geo = extract_level_set(interp_256, 0.5 * interp_256.values.min())
    assert geo.internal_length == 0.0
    assert geo.external_length == pytest.approx(interp_256.mesh.edge_lengths.sum(), rel=1e-14)
    mesh = interp_256.mesh
    assert geo.superlevel_area == pytest.approx(mesh.inner_area + mesh.triangle_areas.sum(), rel=1e-12)


def test_level_near_one(interp_256):
    geo = extract_level_set(interp_256, 1 - 1e-9)
    assert geo.superlevel_area == pytest.approx(interp_256.mesh.inner_area, rel=1e-6)


def test_level_tie_shifted(interp_256):
    t = float(interp_256.values[interp_256.mesh.n_theta * 5])
    geo = extract_level_set(interp_256, t)
    assert geo.t > t
    assert geo.t - t < 1e-10


def test_level_outside_unit_interval(interp_256):
    with pytest.raises(ValueError):
        extract_level_set(interp_256, 1.0)


def test_h_with_zero_phi(solution_256):
    geo = extract_level_set(solution_256, 0.7)
    h = h_function(solution_256, 0.7, np.zeros(len(solution_256.mesh.triangles)), P2, geometry=geo)
    assert h.h_value == pytest.approx(P2.beta * geo.external_length, abs=1e-15)


def test_h_with_constant_phi(solution_256):
    params = ProblemParams(2, 2.5, 1.3)
    c = 0.8
    for t in (0.4, 0.8):
        geo = extract_level_set(solution_256, t)
        h = h_function(solution_256, t, np.full(len(solution_256.mesh.triangles), c), params, geometry=geo)
        meshed = geo.superlevel_area - solution_256.mesh.inner_area
        exact = c**1.5 * geo.internal_length - 1.5 * c**2.5 * meshed + 1.3 * geo.external_length
        assert h.h_value == pytest.approx(exact, rel=1e-12)
        assert h.h_value == pytest.approx(sum(h.parts), rel=1e-15)


def test_h_phi_size_checked(solution_256):
    with pytest.raises(ValueError):
        h_function(solution_256, 0.5, np.zeros(3), P2)


def test_h_matches_energy_mid_range(solution_256):
    phi, lev = solution_ratio_phi(solution_256)
    ts = scan_levels(solution_256)
    lo, span = ts[0], 1 - ts[0]
    mid = [t for t in ts if lo + 0.2 * span <= t <= lo + 0.8 * span]
    E = solution_256.energy_total
    dev = max(abs(h_function(solution_256, t, phi, P2, lev).h_value - E) for t in mid)
    assert dev <= 2e-2 * E


def test_h_energy_gap_shrinks_with_refinement(concentric_pair):
    devs = []
    for m, k in ((64, 8), (256, 32)):
        sol = solve_pair(concentric_pair, P2, m, k)
        phi, lev = solution_ratio_phi(sol)
        ts = scan_levels(sol, 40)
        span = 1 - ts[0]
        mid = [t for t in ts if ts[0] + 0.2 * span <= t <= ts[0] + 0.8 * span]
        devs.append(max(abs(h_function(sol, t, phi, P2, lev).h_value - sol.energy_total) for t in mid))
    assert devs[1] < devs[0]


def test_superlevel_areas_monotone(solution_256):
    ts = scan_levels(solution_256, 60)
    areas = [extract_level_set(solution_256, t).superlevel_area for t in ts]
    assert np.all(np.diff(areas) <= 1e-12)
    radii = [r_of_t(a, 2) for a in areas]
    assert np.all(np.diff(radii) <= 1e-12)


@pytest.mark.parametrize("params,R", [(ProblemParams(3, 2.0, 1.0), 2.0), (ProblemParams(3, 2.5, 1.0), 3.0),
                                      (ProblemParams(2, 1.5, 0.7), 1.8)])
def test_h_star_radial_constant(params, R):
    E = ball_energy(params, R)
    u_R = u_star(params, R, R)
    for t in np.linspace(u_R, 1, 12)[1:-1]:
        assert h_star_radial(params, R, t) == pytest.approx(E, rel=1e-8)


def test_h_star_radial_examples():
    params = ProblemParams(3, 2.0, 1.0)
    assert h_star_radial(params, 2.0, 0.5) == pytest.approx(16 * math.pi / 3, abs=1e-6)
    assert h_star_radial(params, 2.0, 0.9) == pytest.approx(16 * math.pi / 3, abs=1e-6)
    assert h_star_radial(params, 2.0, 1 - 1e-9) == pytest.approx(16 * math.pi / 3, abs=1e-6)
    with pytest.raises(ValueError):
        h_star_radial(params, 2.0, 0.2)


def test_h_radial_below_outer_trace():
    # the whole annulus is the superlevel set; H still equals the energy there
    params = ProblemParams(3, 2.0, 1.0)
    assert h_radial(params, 2.0, 0.1) == pytest.approx(ball_energy(params, 2.0), rel=1e-8)


def test_ratio_power_mass_against_closed_form():
    # n = 3, p = 2, beta = 1.5, R = 2: g(r) = 3 / (r (3 - r))
    params = ProblemParams(3, 2.0, 1.5)
    rho = 1.7
    exact = 36 * math.pi * (1 / (3 - rho) - 1 / 2)
    assert _ratio_power_mass(params, 2.0, rho) == pytest.approx(exact, rel=1e-11)


def test_r_of_t_examples():
    assert r_of_t(unit_ball_volume(2), 2) == pytest.approx(1.0, rel=1e-15)
    assert r_of_t(0.0, 3) == 0.0
    assert r_of_t(4 * math.pi / 3 * 8, 3) == pytest.approx(2.0, rel=1e-15)
    with pytest.raises(ValueError):
        r_of_t(-1.0, 2)


@given(st.floats(0, 50), st.floats(0, 50), st.floats(1.01, 8))
def test_convexity_inequality(a, b, p):
    gap = float(convexity_gap(a, b, p))
    scale = max(a, b, 1e-300) ** p
    assert gap >= -1e-12 * scale * p / (p - 1)


def test_convexity_inequality_sweep():
    rng = np.random.default_rng(3)
    a = rng.uniform(0, 10, 10_000)
    b = rng.uniform(0, 10, 10_000)
    p = rng.uniform(1.05, 6, 10_000)
    gap = convexity_gap(a, b, p)
    far = np.abs(a - b) > 1e-6 * np.maximum(a, b)
    assert np.all(gap[far] > 0)
    assert np.all(convexity_gap(a, a, p) == pytest.approx(0.0, abs=1e-9))


def test_derearranged_matches_ratio(interp_256):
    phi, lev = derearranged_phi(interp_256, P2, 2.0)
    mesh = interp_256.mesh
    c = mesh.nodes[mesh.triangles].mean(axis=1)
    r = np.hypot(c[:, 0], c[:, 1])
    exact = gradient_ratio(P2, 2.0, np.clip(r, 1.0, 2.0))
    assert np.max(np.abs(phi - exact) / exact) < 2e-2
    geo = extract_level_set(interp_256, u_star(P2, 2.0, 1.4))
    assert lev(geo)[0] == pytest.approx(gradient_ratio(P2, 2.0, 1.4), rel=2e-2)


def test_derearranged_near_one(interp_256):
    _, lev = derearranged_phi(interp_256, P2, 2.0)
    geo = extract_level_set(interp_256, 1 - 1e-6)
    assert lev(geo)[0] == pytest.approx(gradient_ratio(P2, 2.0, 1.0), rel=1e-3)


def test_equi_measurability(interp_256):
    phi, _ = derearranged_phi(interp_256, P2, 2.0)
    for t in (0.35, 0.55, 0.75, 0.9):
        geo = extract_level_set(interp_256, t)
        mass = float(np.sum(geo.tri_area * phi**P2.p))
        ref = _ratio_power_mass(P2, 2.0, r_of_t(geo.superlevel_area, 2))
        assert mass == pytest.approx(ref, rel=3e-2)


def test_lemma2_search_bounds(solution_256):
    E = solution_256.energy_total
    n_tri = len(solution_256.mesh.triangles)
    phi, lev = solution_ratio_phi(solution_256)
    for args in ((phi, lev), (np.full(n_tri, P2.b), None), (np.zeros(n_tri), None)):
        t, h = lemma2_search(solution_256, P2, *args)
        assert 0 < t < 1
        assert h <= E * (1 + 2e-2)
    t0, h0 = lemma2_search(solution_256, P2, np.zeros(n_tri))
    assert h0 == 0.0


def test_weighted_integral_radial_signs():
    params = ProblemParams(3, 2.0, 1.0)
    E = ball_energy(params, 2.0)
    assert abs(weighted_h_integral_radial(params, 2.0)) < 1e-6 * E
    assert weighted_h_integral_radial(params, 2.0, 1.1) < 0
    assert weighted_h_integral_radial(params, 2.0, 0.9) < 0


def test_weighted_integral_fem(solution_256):
    E = solution_256.energy_total
    phi, lev = solution_ratio_phi(solution_256)
    assert abs(weighted_h_integral(solution_256, P2, phi, lev)) < 2e-2 * E


def test_h_scan_length(solution_256):
    phi, lev = solution_ratio_phi(solution_256)
    assert len(h_scan(solution_256, P2, phi, lev, levels=[0.5, 0.6])) == 2


def test_centroid_drift_concentric(solution_256):
    assert centroid_drift(solution_256) < 1e-3 * 2.0


def test_centroid_drift_offset_larger(solution_256):
    pair = validate_pair(circle(1.0, center=(0.4, 0.0)), circle(2.0))
    sol = solve_pair(pair, P2, 128, 16)
    assert centroid_drift(sol) > 10 * centroid_drift(solution_256)


def test_centroid_drift_trivial(mesh_64):
    sol = solution_from_values(mesh_64, np.ones(len(mesh_64.nodes)), P2)
    assert centroid_drift(sol) == 0.0
