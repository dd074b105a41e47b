"""Acceptance criteria 1-11.

Each test prints one ``PASS/FAIL criterion N`` line (repeated in the
terminal summary) and then asserts.  Tolerances and time budgets are
fixed here rather than read from the scenario files, so editing a bundled
scenario cannot loosen a criterion.  Time budgets assume the compiled
kernels.
"""
import math
import time
import warnings
from fractions import Fraction

import numpy as np

from toriclab import herm, quantize, raycurve, scenario, toricpotential
from toriclab.geometry import Polytope

import oracles

UNIT = Polytope.interval(0, 1)


def bundled_potentials():
    """Every toric potential named in a bundled bonavero-kind scenario, with that scenario's k_list."""
    out = []
    for entry in scenario.catalog():
        sc = scenario.load(entry["name"])
        if sc["kind"] != "bonavero":
            continue
        for spec in sc["inputs"]["potentials"]:
            out.append((f"{sc['name']}/{spec.get('name', '')}", scenario.build_potential(spec),
                        sc["inputs"].get("k_list", [])))
    return out


def bundled_rays(name):
    return [(spec.get("name", ""), spec, scenario.build_ray(spec)) for spec in scenario.load(name)["inputs"]["rays"]]


def speed_energy_oracle(spec, n_cells=2000):
    """Minus the mean of the PL speed over P, by the midpoint rule on a fine box grid masked to P."""
    from scipy.spatial import Delaunay
    pieces = np.array([[float(Fraction(str(c))) for c in row] for row in spec["speed_pl_pieces"]])
    verts = np.array([[float(Fraction(str(c))) for c in np.atleast_1d(v)] for v in spec["vertices"]])
    lo, hi = verts.min(axis=0), verts.max(axis=0)
    axes = [lo[d] + (np.arange(n_cells) + 0.5) * (hi[d] - lo[d]) / n_cells for d in range(verts.shape[1])]
    pts = np.stack([g.ravel() for g in np.meshgrid(*axes, indexing="ij")], 1)
    if verts.shape[1] == 2:
        pts = pts[Delaunay(verts).find_simplex(pts) >= 0]
    vals = np.max(pts @ pieces[:, :-1].T + pieces[:, -1], axis=1)
    return float(-np.mean(vals))


# ---------------------------------------------------------------- 1

def test_criterion_01_determinant_slope(acceptance_log):
    rng = np.random.default_rng(1)
    start = time.perf_counter()
    worst = 0.0
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", herm.ConvergenceWarning)
        for _ in range(50):
            n = int(rng.integers(1, 9))
            F, _ = herm.random_positive_family(rng, n)
            worst = max(worst, abs(herm.det_slope(F) - herm.stieltjes_integral(herm.filtration_of(F))))
    elapsed = time.perf_counter() - start
    ok = worst <= 1e-3 and elapsed < 10
    acceptance_log(1, ok, f"max |det_slope - stieltjes| = {worst:.2e} (<= 1e-3) over 50 families, {elapsed:.1f}s (< 10s)")
    assert ok


# ---------------------------------------------------------------- 2

def test_criterion_02_dual_isometry_and_axioms(acceptance_log):
    rng = np.random.default_rng(2)
    start = time.perf_counter()
    worst = oracle_gap = 0.0
    d = herm.d1v_distance
    for _ in range(200):
        n = int(rng.integers(1, 33))
        U = []
        for _ in range(3):
            a = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
            U.append(a.conj().T @ a + 0.5 * np.eye(n))
        A, B, C = U
        dab = d(A, B)
        defects = [abs(dab - d(B, A)), abs(d(A, A)), abs(d(herm.dualize(A), herm.dualize(B)) - dab),
                   max(0.0, d(A, C) - dab - d(B, C))]
        worst = max(worst, *defects)
        oracle_gap = max(oracle_gap, abs(dab - oracles.d1v(A, B)))
    elapsed = time.perf_counter() - start
    ok = worst <= 1e-9 and oracle_gap <= 1e-9 and elapsed < 5
    acceptance_log(2, ok, f"axiom/isometry defect {worst:.1e}, Cholesky oracle gap {oracle_gap:.1e} (<= 1e-9), "
                          f"{elapsed:.1f}s (< 5s)")
    assert ok


# ---------------------------------------------------------------- 3

def test_criterion_03_legendre_involution(acceptance_log):
    rng = np.random.default_rng(3)
    cases = [(UNIT, 1e-3, 2.0 ** -10)] * 20 + [(Polytope.simplex(2), 1 / 32, 2.0 ** -6)] * 5
    start = time.perf_counter()
    worst_ratio, mismatched = 0.0, 0
    for P, h, step in cases:
        psi = raycurve.random_test_curve(rng, P, h, step)
        rep = raycurve.involution_errors(psi)
        worst_ratio = max(worst_ratio, max(rep.curve_error, rep.ray_error) / step)
        mismatched += rep.support_mismatch
    elapsed = time.perf_counter() - start
    ok = worst_ratio <= 2 and elapsed < 30
    acceptance_log(3, ok, f"max round-trip error = {worst_ratio:.2f} x tau-step (<= 2) on 20 + 5 curves, "
                          f"{mismatched} boundary-node support flips, {elapsed:.1f}s (< 30s)")
    assert ok


# ---------------------------------------------------------------- 4

def test_criterion_04_energy_formula(acceptance_log):
    elapsed = 0.0
    worst, details = 0.0, []
    for name, spec, r in bundled_rays("ray_energy_family"):
        start = time.perf_counter()
        e = raycurve.ray_energy_slope(r)
        elapsed += time.perf_counter() - start
        worst = max(worst, e.deviation)
        # independent value: minus the mean of the speed function, by midpoint rule
        oracle = speed_energy_oracle(spec)
        worst = max(worst, max(abs(v - oracle) for v in e.values))
        if "expected_slope" in spec:
            worst = max(worst, max(abs(v - spec["expected_slope"]) for v in e.values))
        details.append(f"{name}={e.integral:.4f}")
    half = raycurve.ray_energy_slope(raycurve.Ray.geodesic(UNIT, lambda p: p[:, 0]))
    exact = max(abs(v + 0.5) for v in half.values)
    ok = worst <= 5e-3 and exact <= 5e-3 and elapsed < 10
    acceptance_log(4, ok, f"max method disagreement {worst:.1e} (<= 5e-3), tp slope error {exact:.1e}; "
                          f"{', '.join(details)}; {elapsed:.1f}s (< 10s)")
    assert ok


# ---------------------------------------------------------------- 5

def test_criterion_05_bonavero_limit(acceptance_log):
    start = time.perf_counter()
    half = toricpotential.DualPotential.from_function(UNIT, None, Polytope.interval(0, 0.5))
    k = 200
    count = quantize.h0_count(half, k)
    oracle = oracles.count_points(k, [(0, k)], [lambda a: a[0] < Fraction(k, 2)])
    err1 = abs(count / k - 0.5)
    tri = scenario.build_potential(scenario.load("bonavero_triangle")["inputs"]["potentials"][0])
    k2 = 64
    count2 = quantize.h0_count(tri, k2)
    oracle2 = oracles.count_points(k2, [(0, k2), (0, k2)], [lambda a: a[0] + a[1] < k2])
    m = toricpotential.mass(tri)
    err2 = abs(2 * count2 / k2 ** 2 - m) / m
    elapsed = time.perf_counter() - start
    ok = err1 <= 0.01 and err2 <= 0.02 and count == oracle and count2 == oracle2 and elapsed < 60
    acceptance_log(5, ok, f"interval |h0/k - 1/2| = {err1:.4f} (<= 0.01) at k=200; triangle relative error "
                          f"{err2:.4f} (<= 0.02) at k=64; counts match lattice oracle: "
                          f"{count == oracle and count2 == oracle2}; {elapsed:.1f}s (< 60s)")
    assert ok


# ---------------------------------------------------------------- 6

def test_criterion_06_arithmetic_dominates_mass(acceptance_log):
    violations, checked, worst = [], 0, np.inf
    for name, u, k_list in bundled_potentials():
        n = u.dim
        ks = sorted(set(k_list) | {4, 8, 16, 32, 64})
        m = toricpotential.mass(u)
        for k in ks:
            ratio = math.factorial(n) * quantize.h0_count(u, k) / k ** n
            slack = ratio - (m - 2.0 / k)
            worst = min(worst, slack)
            checked += 1
            if slack < 0:
                violations.append((name, k))
    ok = not violations
    acceptance_log(6, ok, f"{len(violations)} violations of ratio >= mass - 2/k over {checked} (potential, k) pairs, "
                          f"smallest slack {worst:.4f}")
    assert ok, violations


# ---------------------------------------------------------------- 7

def test_criterion_07_lkna_expansion(acceptance_log):
    start = time.perf_counter()
    r = raycurve.Ray.geodesic(UNIT, lambda p: p[:, 0])
    psi = raycurve.hat_curve(r)
    ks = (8, 16, 32, 64, 128)
    worst_exact = max(abs(quantize.lkna(psi, k) / k + (k + 1) / (2 * k)) for k in ks)
    worst_oracle = max(abs(quantize.lkna(psi, k) - oracles.halfslope_jump_sum(k)) for k in ks)
    limit = quantize.ina(r, ks)
    elapsed = time.perf_counter() - start
    ok = worst_exact <= 1e-12 and worst_oracle <= 1e-9 and abs(limit + 0.5) <= 5e-3 and elapsed < 120
    acceptance_log(7, ok, f"max |lkna/k + (k+1)/(2k)| = {worst_exact:.1e}, jump-sum oracle gap {worst_oracle:.1e}, "
                          f"ina = {limit:.6f} (|+0.5| <= 5e-3), {elapsed:.1f}s (< 120s)")
    assert ok


# ---------------------------------------------------------------- 8

def test_criterion_08_slope_bridge(acceptance_log):
    start = time.perf_counter()
    gaps = {}
    for name, _, r in bundled_rays("lk_slope_bridge"):
        slope, na = quantize.lk_ray_bridge(r, 16)
        gaps[name] = abs(slope - na)
    elapsed = time.perf_counter() - start
    ok = len(gaps) >= 2 and max(gaps.values()) <= 1e-2 and elapsed < 120
    acceptance_log(8, ok, ", ".join(f"{k}: |slope - lkna| = {v:.4f}" for k, v in gaps.items())
                   + f" (<= 1e-2) at k=16, {elapsed:.1f}s (< 120s)")
    assert ok


# ---------------------------------------------------------------- 9

def test_criterion_09_quantization(acceptance_log):
    start = time.perf_counter()
    sc = scenario.load("quantization_smooth")
    u = scenario.build_potential(sc["inputs"]["potential"])
    ref = toricpotential.DualPotential.reference(u.polytope, u.h)
    ks = [8, 16, 32, 64]
    lrows = quantize.quantization_table(u, ks)
    drows = quantize.d1k_table(u, ref, ks)
    coef = np.asarray(sc["inputs"]["potential"]["g_poly"], dtype=float)
    target = oracles.energy_by_riemann(lambda p: np.polynomial.polynomial.polyval(p, coef))
    rel = [abs(r.value - target) / abs(target) for r in lrows]
    derr = [r.error for r in drows]
    nonincreasing = all(b <= a for a, b in zip(derr, derr[1:]))
    elapsed = time.perf_counter() - start
    ok = max(rel) <= 0.05 and nonincreasing and elapsed < 120
    acceptance_log(9, ok, f"Lk relative errors {[round(x, 4) for x in rel]} (<= 5%), d1k errors "
                          f"{[round(x, 4) for x in derr]} nonincreasing: {nonincreasing}, {elapsed:.1f}s (< 120s)")
    assert ok


# ---------------------------------------------------------------- 10

def _oracle_growth(primal_of_s, breaks_of_s, alpha, k):
    """Exponent a in log N(s) = a s + b log s + c, solved exactly from three horizons."""
    s = np.array([32.0, 48.0, 64.0])
    ln = [math.log(oracles.hilbert_entry(primal_of_s(x), alpha, k, breaks=breaks_of_s(x))) for x in s]
    return float(np.linalg.solve(np.stack([s, np.log(s), np.ones(3)], 1), ln)[0])


def test_criterion_10_exponent_bridge(acceptance_log):
    start = time.perf_counter()
    k = 8
    worst, oracle_gap = 0.0, 0.0
    primals = {
        "linear": (lambda s: (lambda x: max(0.0, x - s)), lambda s: (s,)),
        "hinge": (lambda s: (lambda x: max(-s / 2, x / 2, x - s / 2)), lambda s: (-s, s)),
    }
    for name, _, r in bundled_rays("exponent_bridge_pl"):
        table = quantize.exponent_bridge_table(r, k)
        worst = max(worst, float(np.max(np.abs(table[:, 0] - table[:, 1]))))
        if name in primals:
            for alpha in range(k + 1):
                oracle_gap = max(oracle_gap, abs(table[alpha, 0] - _oracle_growth(*primals[name], alpha, k)))
    elapsed = time.perf_counter() - start
    ok = worst <= 1e-2 and oracle_gap <= 1e-2 and elapsed < 60
    acceptance_log(10, ok, f"max |growth - jump| = {worst:.4f} (<= 1e-2) over all sections at k=8, quadrature "
                           f"oracle gap {oracle_gap:.4f}, {elapsed:.1f}s (< 60s)")
    assert ok


# ---------------------------------------------------------------- 11

def test_criterion_11_envelope_coherence(acceptance_log):
    bad = []
    for name, u, _ in bundled_potentials():
        env = toricpotential.i_envelope(u)
        model = toricpotential.model_envelope(u)
        same = np.array_equal(env.finite, model.finite) and np.array_equal(env.values, model.values)
        idem = np.array_equal(toricpotential.i_envelope(env).values, env.values) and np.array_equal(
            toricpotential.model_envelope(model).values, model.values)
        gap = abs(toricpotential.mixed_mass_gap(u, env).gap)
        if not (same and idem and gap <= 1e-9):
            bad.append((name, same, idem, gap))
    ok = not bad
    acceptance_log(11, ok, f"{len(bundled_potentials())} bundled toric inputs, failures: {bad or 'none'}")
    assert ok
