import math

import numpy as np
import pytest

from picard_swarm.augmentation import to_component_major
from picard_swarm.cheb_core import build_grid, build_matrices, pc_solve
from picard_swarm.dynamics import (
    AU_KM,
    MU_SUN,
    BodySpec,
    ForceModelConfig,
    KeplerElements,
    KeplerEphemeris,
    StateVector,
    build_ephemeris_cache,
    elements_to_state,
    eval_force_block,
    eval_nbody,
    eval_two_body,
    fit_chebyshev_ephemeris,
    kepler_propagate,
    kepler_propagate_many,
    orbital_period,
)
from picard_swarm.exceptions import (
    CloseApproachError,
    CoverageError,
    NonEllipticError,
    ShapeError,
    SingularityError,
)
from picard_swarm.oracle import OracleConfig, rk_propagate
from picard_swarm.scenarios import MU_VENUS, reference_force_model, reference_state, venus


def scalar_nbody(r, mu_c, bodies):
    """Term-by-term restricted N-body sum in plain floats (test oracle)."""
    x, y, z = (float(c) for c in r)
    rn = math.sqrt(x * x + y * y + z * z)
    ax, ay, az = (-mu_c * c / rn**3 for c in (x, y, z))
    for mu_i, rb in bodies:
        bx, by, bz = (float(c) for c in rb)
        dx, dy, dz = bx - x, by - y, bz - z
        d = math.sqrt(dx * dx + dy * dy + dz * dz)
        b = math.sqrt(bx * bx + by * by + bz * bz)
        ax += mu_i * (dx / d**3 - bx / b**3)
        ay += mu_i * (dy / d**3 - by / b**3)
        az += mu_i * (dz / d**3 - bz / b**3)
    return np.array([ax, ay, az])


# ---- two-body -------------------------------------------------------------


def test_two_body_unit():
    np.testing.assert_array_equal(eval_two_body(np.array([1.0, 0, 0]), 1.0), [-1.0, 0, 0])
    np.testing.assert_array_equal(eval_two_body(np.array([0, 2.0, 0]), 4.0), [0, -1.0, 0])


def test_two_body_earth_surface():
    a = eval_two_body(StateVector(0.0, [6378.137, 0, 0], [0, 0, 0]), 398600.4418)
    expected = 398600.4418 / 6378.137**2
    assert np.linalg.norm(a) == pytest.approx(expected, rel=1e-15)
    assert np.linalg.norm(a) == pytest.approx(9.798e-3, rel=1e-4)


def test_two_body_singular():
    with pytest.raises(SingularityError):
        eval_two_body(np.zeros(3), 1.0)


# ---- n-body ---------------------------------------------------------------


def _table_for(bodies, times, mu=MU_SUN):
    return build_ephemeris_cache(bodies, np.asarray(times, float), mu)


def test_nbody_empty_list_is_two_body():
    r = np.array([1.1e8, -2.0e7, 3.0e6])
    tab = _table_for([], [0.0])
    np.testing.assert_array_equal(eval_nbody(r, 0, tab), eval_two_body(r, MU_SUN))


def test_nbody_vanishing_perturber():
    r = np.array([1.1e8, -2.0e7, 3.0e6])
    body = BodySpec("tiny", 1e-300, venus().ephemeris)
    tab = _table_for([body], [0.0])
    np.testing.assert_allclose(eval_nbody(r, 0, tab), eval_two_body(r, MU_SUN), rtol=1e-16, atol=0)


def test_nbody_close_perturber_matches_scalar_sum():
    v = venus()
    rv = v.ephemeris.position(0.0)[0]
    offset = np.array([0.6, -0.7, 0.39]) * 0.01 * AU_KM / np.linalg.norm([0.6, -0.7, 0.39])
    r = rv + offset
    tab = _table_for([v], [0.0])
    expected = scalar_nbody(r, MU_SUN, [(MU_VENUS, rv)])
    np.testing.assert_allclose(eval_nbody(r, 0, tab), expected, rtol=1e-14)


def test_nbody_superposition():
    fm = reference_force_model()
    t = np.array([0.0, 1e6])
    r = reference_state().r * 1.01
    tab_all = _table_for(fm.bodies, t)
    two = eval_two_body(r, MU_SUN)
    total = eval_nbody(r, 1, tab_all) - two
    parts = sum(eval_nbody(r, 1, _table_for([b], t)) - two for b in fm.bodies)
    np.testing.assert_allclose(total, parts, rtol=1e-15 * 10, atol=1e-15 * np.linalg.norm(total))


def test_close_approach_error_names_body():
    v = venus()
    rv = v.ephemeris.position(0.0)[0]
    tab = _table_for([v], [0.0])
    with pytest.raises(CloseApproachError) as info:
        eval_nbody(rv + 0.5, 0, tab)
    assert info.value.body == "venus"


def test_nbody_epoch_mismatch():
    tab = _table_for([], [5.0])
    with pytest.raises(ValueError):
        eval_nbody(StateVector(4.0, [1e8, 0, 0], [0, 30, 0]), 0, tab)


# ---- force block ----------------------------------------------------------


def test_force_block_circular_orbit():
    mu = MU_SUN
    r0 = AU_KM
    vc = math.sqrt(mu / r0)
    x0 = np.array([r0, 0, 0, 0, vc, 0])
    g = build_grid(40, 0.0, 1e7)
    samples = kepler_propagate_many(x0, mu, g.times)
    f = eval_force_block(samples, g, None, ForceModelConfig())
    acc = f[:, 3:] / g.omega2
    rn = np.linalg.norm(samples[:, :3], axis=1)
    np.testing.assert_allclose(np.linalg.norm(acc, axis=1) * rn**2, mu, rtol=1e-13)
    np.testing.assert_allclose(f[:, :3], g.omega2 * samples[:, 3:], rtol=1e-15)


def test_force_block_replication(force_model):
    g = build_grid(30, 0.0, 5e6)
    x0 = reference_state().as_array()
    one = kepler_propagate_many(x0, MU_SUN, g.times)
    block = to_component_major(np.repeat(one[None], 5, axis=0))
    tab = build_ephemeris_cache(force_model.bodies, g, MU_SUN)
    f = eval_force_block(block, g, tab, force_model).reshape(30, 6, 5)
    for m in range(1, 5):
        np.testing.assert_array_equal(f[:, :, m], f[:, :, 0])


def test_force_block_matches_loop_bitwise(force_model, rng):
    """13509-state block (one node row checked) equals looped single-state evaluation."""
    n_states = 13509
    g = build_grid(3, 0.0, 2e6)
    tab = build_ephemeris_cache(force_model.bodies, g, MU_SUN)
    base = reference_state().as_array()
    traj = base + rng.normal(size=(n_states, 3, 6)) * np.r_[1e5, 1e5, 1e5, 0.1, 0.1, 0.1]
    block = to_component_major(traj)
    f = eval_force_block(block, g, tab, force_model).reshape(3, 6, n_states)
    node = 1
    for m in range(n_states):
        acc = eval_nbody(traj[m, node], node, tab) * g.omega2
        assert np.array_equal(f[node, 3:, m], acc)
        assert np.array_equal(f[node, :3, m], traj[m, node, 3:] * g.omega2)


def test_force_block_workers_identical(force_model, rng):
    g = build_grid(64, 0.0, 5e6)
    tab = build_ephemeris_cache(force_model.bodies, g, MU_SUN)
    traj = reference_state().as_array() + rng.normal(size=(50, 64, 6)) * 1e3
    block = to_component_major(traj)
    a = eval_force_block(block, g, tab, force_model)
    b = eval_force_block(block, g, tab, force_model, workers=4)
    np.testing.assert_array_equal(a, b)


def test_force_block_errors(force_model):
    g = build_grid(5, 0.0, 1.0)
    with pytest.raises(ShapeError):
        eval_force_block(np.zeros((5, 7)), g, None, ForceModelConfig())
    with pytest.raises(ShapeError):
        eval_force_block(np.ones((4, 6)), g, None, ForceModelConfig())
    block = np.ones((5, 12))
    block[2, 1] = block[2, 3] = block[2, 5] = 0.0  # trajectory 1 at the origin on node 2
    with pytest.raises(SingularityError) as info:
        eval_force_block(block, g, None, ForceModelConfig())
    assert (info.value.node, info.value.trajectory) == (2, 1)


# ---- conics ---------------------------------------------------------------


def test_kepler_half_and_full_period():
    s = StateVector(0.0, [1, 0, 0], [0, 1, 0])
    half = kepler_propagate(s, 1.0, math.pi)
    np.testing.assert_allclose(half.r, [-1, 0, 0], atol=1e-12)
    np.testing.assert_allclose(half.v, [0, -1, 0], atol=1e-12)
    full = kepler_propagate(s, 1.0, 2 * math.pi)
    np.testing.assert_allclose(full.as_array(), s.as_array(), atol=1e-12)
    assert full.epoch == 2 * math.pi


def test_kepler_eccentric_matches_rk_oracle():
    # periapsis of a = 1, e = 0.5, mu = 1
    s = StateVector(0.0, [0.5, 0, 0], [0, math.sqrt(3.0), 0])
    pc = kepler_propagate(s, 1.0, 1.0)
    ref = rk_propagate(s, lambda t, r: -r / np.linalg.norm(r) ** 3, 0.0, 1.0, OracleConfig())
    np.testing.assert_allclose(pc.as_array(), ref.as_array(), rtol=0, atol=1e-12)


@pytest.mark.parametrize("e", [0.0, 0.2, 0.7, 0.95])
def test_kepler_period_recurrence(e):
    el = KeplerElements(0.9 * AU_KM, e, 0.3, 1.0, 2.0, 0.7, 0.0)
    s = elements_to_state(el, MU_SUN)
    period = orbital_period(s, MU_SUN)
    back = kepler_propagate(s, MU_SUN, period)
    np.testing.assert_allclose(back.r, s.r, rtol=0, atol=1e-11 * np.linalg.norm(s.r))
    np.testing.assert_allclose(back.v, s.v, rtol=0, atol=1e-11 * np.linalg.norm(s.v))


def test_kepler_backward_inverse():
    s = reference_state()
    fwd = kepler_propagate(s, MU_SUN, 4.2e6)
    back = kepler_propagate(fwd, MU_SUN, -4.2e6)
    np.testing.assert_allclose(back.as_array(), s.as_array(), rtol=1e-12)


def test_kepler_non_elliptic():
    with pytest.raises(NonEllipticError):
        kepler_propagate(StateVector(0.0, [1, 0, 0], [0, 1.5, 0]), 1.0, 1.0)
    with pytest.raises(NonEllipticError):
        orbital_period(StateVector(0.0, [1, 0, 0], [0, 2.0, 0]), 1.0)


def test_elements_to_state_energy():
    el = KeplerElements(1.3 * AU_KM, 0.4, 0.2, 0.1, 0.3, 2.0, 100.0)
    s = elements_to_state(el, MU_SUN)
    energy = 0.5 * s.v @ s.v - MU_SUN / np.linalg.norm(s.r)
    assert energy == pytest.approx(-MU_SUN / (2 * el.a), rel=1e-13)
    assert s.epoch == 100.0


# ---- ephemeris cache ------------------------------------------------------


def test_cache_no_bodies():
    tab = build_ephemeris_cache([], build_grid(10, 0, 1), 7.0)
    assert tab.n_bodies == 0 and tab.central_mu == 7.0


def test_cache_circular_body_full_period():
    a = AU_KM
    el = KeplerElements(a, 0.0, 0.1, 0.2, 0.0, 0.3, 0.0)
    body = BodySpec("p", 1e5, KeplerEphemeris(el, MU_SUN))
    period = 2 * math.pi * math.sqrt(a**3 / MU_SUN)
    tab = build_ephemeris_cache([body], build_grid(50, 0.0, period), MU_SUN)
    np.testing.assert_allclose(tab.positions[0, -1], tab.positions[0, 0], rtol=0, atol=1e-11 * a)
    with pytest.raises(ValueError):
        tab.positions[0, 0, 0] = 1.0


def test_tabulated_matches_analytic():
    v = venus()
    table = fit_chebyshev_ephemeris(v.ephemeris, 0.0, 3e7, n_segments=10, degree=20)
    g = build_grid(200, 1.0, 2.9e7)
    tab_a = build_ephemeris_cache([v], g, MU_SUN)
    tab_t = build_ephemeris_cache([BodySpec("venus", v.mu, table)], g, MU_SUN)
    np.testing.assert_allclose(tab_t.positions, tab_a.positions, rtol=0, atol=1e-6)


def test_tabulated_coverage_error():
    table = fit_chebyshev_ephemeris(venus().ephemeris, 0.0, 1e6, n_segments=2, degree=8)
    with pytest.raises(CoverageError) as info:
        build_ephemeris_cache([BodySpec("v", 1.0, table)], build_grid(5, 0.0, 2e6), MU_SUN)
    assert info.value.epoch > 1e6


# ---- invariants along converged trajectories ------------------------------


def test_two_body_pc_energy_and_momentum():
    el = KeplerElements(AU_KM, 0.2, 0.05, 0.3, 0.4, 0.5, 0.0)
    s = elements_to_state(el, MU_SUN)
    period = orbital_period(s, MU_SUN)
    g = build_grid(200, 0.0, period)
    cfg = ForceModelConfig()
    x0 = s.as_array()
    guess = kepler_propagate_many(x0, MU_SUN * (1 + 1e-6), g.times)
    guess[0] = x0
    y, rep = pc_solve(g, build_matrices(200), lambda y: eval_force_block(y, g, None, cfg), guess, x0)
    assert rep.converged
    r, v = y[:, :3], y[:, 3:]
    energy = 0.5 * np.sum(v * v, axis=1) - MU_SUN / np.linalg.norm(r, axis=1)
    h = np.cross(r, v)
    assert np.max(np.abs(energy - energy[0])) <= 1e-11 * abs(energy[0])
    assert np.max(np.linalg.norm(h - h[0], axis=1)) <= 1e-11 * np.linalg.norm(h[0])
