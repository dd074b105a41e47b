import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from toriclab.errors import DomainError, HorizonError, ShapeError
from toriclab.geometry import Polytope
from toriclab.raycurve import (Ray, TestCurve, chordal_d1c, check_ray, check_transform, dyadic_tau_grid,
                               from_filtration, hat_curve, hat_transform, hat_values, involution_errors,
                               mass_curve, random_test_curve, ray_energy_slope, shifted_curve)
from toriclab.toricpotential import d1_distance

import oracles

UNIT = Polytope.interval(0, 1)
TRIANGLE = Polytope.simplex(2)
H = 1 / 256

seeds = st.integers(min_value=0, max_value=2**32 - 1)


def bend(t):
    """-t^2/2 up to t = 1, then continued with slope -1."""
    t = np.asarray(t, dtype=float)
    return -0.5 * np.minimum(t, 1.0) ** 2 - np.maximum(t - 1.0, 0.0)


def tp_ray(h=H):
    return Ray.geodesic(UNIT, lambda p: p[:, 0], h)


def ramp_ray(h=H, n_t=2049):
    """g_t(p) = t p + bend(t), whose hat is max(0, p + tau)^2 / 2 while p + tau <= 1."""
    grid = tp_ray(h).grid
    t = np.linspace(0.0, 2.0, n_t)
    p = grid.points[:, 0]
    vals = t[:, None] * p[None, :] + bend(t)[:, None]
    return Ray(UNIT, h, t, vals)


# ---------------------------------------------------------------- rays

def test_ray_validation():
    grid = tp_ray().grid
    with pytest.raises(ShapeError):
        Ray(UNIT, H, np.array([0.0, 0.0]), np.zeros((2, grid.size)))
    with pytest.raises(ShapeError):
        Ray(UNIT, H, np.array([0.0, 1.0]), np.zeros((3, grid.size)))
    with pytest.raises(DomainError):
        Ray(UNIT, H, np.array([0.0, 1.0]), np.ones((2, grid.size)))
    with pytest.raises(DomainError):
        tp_ray().at(-1.0)


def test_ray_linear_continuation():
    r = tp_ray()
    p = r.grid.points[:, 0]
    assert np.allclose(r.at(10.0), 10.0 * p)
    assert np.allclose(r.asymptotic_slope, p)
    assert r.sup_slope == 0.0


def test_ray_shift_moves_slopes():
    r = tp_ray().shift(0.25)
    assert np.allclose(r.asymptotic_slope, r.grid.points[:, 0] - 0.25)
    assert r.sup_slope == pytest.approx(0.25)


def test_ramp_ray_is_concave():
    r = ramp_ray()
    assert r.concavity_defect() == 0.0
    assert r.sup_slope == pytest.approx(1.0)


def test_from_generator_settles_or_raises():
    p = lambda t: tp_ray().grid.points[:, 0]  # noqa: E731
    r = Ray.from_generator(UNIT, lambda t: t * p(t) - np.maximum(t - 3.0, 0.0), H)
    assert np.allclose(r.asymptotic_slope, p(0) - 1.0)
    assert r.concavity_defect() == 0.0
    with pytest.raises(HorizonError):
        Ray.from_generator(UNIT, lambda t: t * p(t) + 1 - np.sqrt(1 + t * t), H)


# ---------------------------------------------------------------- hat transform

@pytest.mark.parametrize("tau", [-1.0, -0.75, -0.5, -0.125, 0.0])
def test_hat_of_linear_ray_is_zero_on_shrinking_interval(tau):
    u = hat_transform(tp_ray(), tau)
    if tau < 0:
        assert u.body.same_as(Polytope.interval(0, -tau))
    else:
        assert u.body.volume < 1e-9 and u.body.contains(np.array([[0.0]]))[0]
    assert np.all(u.values[u.finite] == 0.0)


def test_hat_above_tau_plus_is_empty():
    assert hat_transform(tp_ray(), 0.25).is_empty


@pytest.mark.parametrize("p, tau", [(0.25, -0.5), (0.75, -0.5), (0.5, -0.5), (0.1, -0.05), (0.9, -1.0)])
def test_hat_against_brute_force_sup(p, tau):
    r = tp_ray()
    i = int(np.argmin(np.abs(r.grid.points[:, 0] - p)))
    got = hat_values(r, tau)[0, i]
    want = oracles.brute_hat(lambda t, q: t * q, r.grid.points[i, 0], tau)
    assert got == want or (np.isinf(got) and np.isinf(want))


@pytest.mark.parametrize("tau", [-1.0, -0.6, -0.3, 0.0, 0.2, 0.5])
def test_hat_of_ramp_ray_closed_form(tau):
    r = ramp_ray()
    p = r.grid.points[:, 0]
    got = hat_values(r, tau)[0]
    a = p + tau
    ok = a <= 1 - 1e-9
    assert np.allclose(got[ok], 0.5 * np.maximum(0.0, a[ok]) ** 2, atol=1e-6)
    assert np.all(np.isinf(got[a > 1 + 1e-9]))


@settings(max_examples=15, deadline=None)
@given(seeds)
def test_hat_of_ramp_matches_brute_oracle(seed):
    rng = np.random.default_rng(seed)
    r = ramp_ray()
    i = int(rng.integers(0, r.grid.size))
    tau = float(rng.uniform(-1.0, 0.9))
    q = r.grid.points[i, 0]
    want = oracles.brute_hat(lambda t, x: t * x + bend(t), q, tau, t_max=20.0)
    got = hat_values(r, tau)[0, i]
    if np.isinf(want):
        assert np.isinf(got) or q + tau > 1 - 1e-6
    else:
        assert got == pytest.approx(want, abs=1e-6)


def test_constant_ray_gives_constant_curve():
    r = Ray.geodesic(UNIT, lambda p: np.zeros(len(p)), H)
    psi = hat_curve(r)
    assert psi.tau_plus == 0.0 and psi.tau_minus == 0.0
    assert np.all(psi.values[:, psi.grid.inside] == 0.0)
    assert hat_transform(r, 1e-3).is_empty
    ref = TestCurve.constant_zero(UNIT, H)
    assert ref.tau_plus == psi.tau_plus


def test_hat_curve_is_decreasing_in_tau():
    assert hat_curve(ramp_ray(), level=6).monotonicity_defect() == 0.0


def test_sup_slope_equals_tau_plus():
    for r in (tp_ray(), ramp_ray(), ramp_ray().shift(-0.3)):
        assert hat_curve(r, level=6).tau_plus == pytest.approx(r.sup_slope, abs=1e-12)


@pytest.mark.parametrize("c", [-0.5, 0.25, 1.0])
def test_shift_rules(c):
    r = ramp_ray()
    grid = dyadic_tau_grid(-1.0, 1.0, 6)
    base = hat_curve(r, grid)
    moved = hat_curve(r.shift(c), grid + c)
    assert np.allclose(moved.values[:base.tau_grid.size], base.values[:moved.tau_grid.size], atol=1e-12)
    assert moved.tau_plus == pytest.approx(base.tau_plus + c)
    s = shifted_curve(base, c)
    assert s.tau_plus == pytest.approx(base.tau_plus + c)
    assert s.body(0.1 + c).same_as(base.body(0.1), tol=1e-12)


def test_test_curve_validation():
    psi = hat_curve(tp_ray(), level=4)
    with pytest.raises(DomainError):
        TestCurve(UNIT, H, psi.tau_grid[2:], psi.values[2:], psi.rule)
    with pytest.raises(ShapeError):
        TestCurve(UNIT, H, psi.tau_grid, psi.values[:-1], psi.rule)


# ---------------------------------------------------------------- check transform and involution

def test_check_of_hat_recovers_linear_ray():
    r = tp_ray()
    psi = hat_curve(r, level=8)
    for t in (0.5, 1.0, 3.0):
        u = check_transform(psi, t)
        assert np.allclose(u.values[u.finite], r.at(t)[u.finite], atol=2.0 ** -8 * t + 1e-12)


def test_check_ray_starts_at_reference():
    psi = random_test_curve(np.random.default_rng(3), UNIT, H, tau_step=2.0 ** -6)
    r = check_ray(psi, np.linspace(0, 4, 33))
    assert np.all(r.values[0, r.grid.inside] == 0.0)
    assert r.concavity_defect() < 1e-12


@settings(max_examples=5, deadline=None)
@given(seeds)
def test_involution_on_random_curves(seed):
    step = 2.0 ** -6
    psi = random_test_curve(np.random.default_rng(seed), UNIT, 1 / 128, tau_step=step)
    rep = involution_errors(psi)
    assert rep.curve_error <= 2 * step
    assert rep.ray_error <= 2 * step


# ---------------------------------------------------------------- masses and energies

def test_mass_curve_of_linear_ray():
    m = mass_curve(hat_curve(tp_ray(), level=6))
    taus = np.array([-2.0, -1.0, -0.5, -0.25, 0.0, 0.5])
    assert np.allclose(m(taus), [1.0, 1.0, 0.5, 0.25, 0.0, 0.0], atol=1e-12)


def test_energy_slope_of_linear_ray():
    e = ray_energy_slope(tp_ray())
    for v in e.values:
        assert v == pytest.approx(-0.5, abs=1e-6)
    assert e.riemann_lower <= e.integral <= e.riemann_upper


def test_energy_slope_moves_with_shift():
    r = ramp_ray()
    base, moved = ray_energy_slope(r), ray_energy_slope(r.shift(-0.5))
    assert moved.linear == pytest.approx(base.linear - 0.5, abs=1e-12)
    assert moved.integral == pytest.approx(base.integral - 0.5, abs=1e-6)


@settings(max_examples=8, deadline=None)
@given(seeds)
def test_energy_slope_methods_agree_on_random_geodesics(seed):
    rng = np.random.default_rng(seed)
    A = rng.uniform(-1, 1, 3)
    b = rng.uniform(-1, 1, 3)
    r = Ray.geodesic(UNIT, lambda p: np.max(np.outer(p[:, 0], A) + b, axis=1), 1 / 512)
    e = ray_energy_slope(r)
    assert e.deviation < 1e-5


def test_energy_slope_triangle():
    r = Ray.geodesic(TRIANGLE, lambda p: p[:, 0] + p[:, 1], 1 / 64)
    e = ray_energy_slope(r, level=8)
    # mean of p1 + p2 over the triangle is 2/3
    assert e.linear == pytest.approx(-2 / 3, abs=1e-9)
    assert e.integral == pytest.approx(-2 / 3, abs=1e-3)


# ---------------------------------------------------------------- chordal distance

def test_chordal_of_identical_rays_is_zero():
    assert chordal_d1c(tp_ray(), tp_ray()).value == 0.0


@pytest.mark.parametrize("c", [-0.75, 0.5])
def test_chordal_of_shifted_ray(c):
    r = ramp_ray()
    assert chordal_d1c(r, r.shift(c)).value == pytest.approx(abs(c), abs=1e-9)


def test_chordal_of_scaled_linear_ray():
    r1 = tp_ray()
    r2 = Ray.geodesic(UNIT, lambda p: 2 * p[:, 0], H)
    # 2tp dominates tp, so d1 is the mean difference t * mean(p)
    assert chordal_d1c(r1, r2).value == pytest.approx(0.5, abs=1e-9)


def test_chordal_quotients_are_nondecreasing():
    r = ramp_ray()
    ref = Ray.geodesic(UNIT, lambda p: np.zeros(len(p)), H)
    est = chordal_d1c(r, ref, t_max=64.0)
    assert np.all(np.diff(est.quotients) >= -1e-12)
    assert est.value == pytest.approx(d1_distance(r.potential(1000.0), ref.potential(1000.0)) / 1000.0, abs=1e-3)


def test_chordal_rejects_mismatched_grids():
    with pytest.raises(ShapeError):
        chordal_d1c(tp_ray(H), tp_ray(1 / 64))


# ---------------------------------------------------------------- filtrations

def test_filtration_bodies():
    psi = from_filtration(UNIT, 2, [0, 1, 2], H)
    assert psi.body(0.5).same_as(Polytope.interval(0.5, 1), tol=1e-12)
    assert psi.body(0.0).same_as(UNIT, tol=1e-12)
    assert psi.body(1.0).volume == 0.0
    assert psi.body(1.01).is_empty
    assert psi.tau_plus == 1.0 and psi.tau_minus == 0.0


def test_filtration_requires_one_weight_per_point():
    with pytest.raises(ShapeError):
        from_filtration(UNIT, 2, [0, 1], H)


def test_filtration_energy_by_mass_integral():
    psi = from_filtration(UNIT, 2, lambda a: a[0], H)
    m = mass_curve(psi)
    # bodies [tau_step, 1] with tau_step in {0, 1/2, 1}
    assert m(0.25) == pytest.approx(0.5)
    assert m(0.75) == pytest.approx(0.0)


def test_curve_json_lists_bodies():
    psi = from_filtration(UNIT, 2, [0, 1, 2], H, tau_grid=np.array([0.0, 0.5, 1.0]))
    obj = psi.to_json()
    assert len(obj["bodies"]) == 3
    assert obj["tau_plus"] == 1.0
