"""Rays, test curves and the Legendre transforms between them.

Rays are t-indexed families of dual potentials g_t (concave in t, g_0 = 0),
piecewise linear in t between samples and continued linearly past the
last sample.  Test curves are tau-indexed families whose bodies are the
super-level sets of a function sigma on P, so the body at any tau is
available exactly.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from . import _kernels
from .errors import (DomainError, FiniteEnergyError, HorizonError, ShapeError)
from .geometry import (ConvexBody, Polytope, default_resolution, grid_for, lattice_points,
                       sublevel_body)
from .toricpotential import DualPotential, d1_distance, energy_I, total_mass

DYADIC_LEVEL = 10
LEVEL_TOL = 1e-12


# --------------------------------------------------------------------------- rays

@dataclass(frozen=True, eq=False)
class Ray:
    """Dual potentials g_t on the grid of P, sampled at t_grid (t_grid[0] = 0, g_0 = 0)."""
    polytope: Polytope
    h: float
    t_grid: np.ndarray
    values: np.ndarray
    stable: bool = True

    def __post_init__(self):
        grid = grid_for(self.polytope, self.h)
        t = np.asarray(self.t_grid, dtype=float)
        v = np.array(self.values, dtype=float)
        if t.ndim != 1 or t.size < 2 or t[0] != 0 or np.any(np.diff(t) <= 0):
            raise ShapeError("t_grid must be increasing, start at 0 and have at least two samples")
        if v.shape != (t.size, grid.size):
            raise ShapeError(f"values must have shape {(t.size, grid.size)}, got {v.shape}")
        v[:, ~grid.inside] = np.inf
        if not np.all(np.isfinite(v[:, grid.inside])):
            raise FiniteEnergyError("ray potentials must have full mass")
        if np.max(np.abs(v[0, grid.inside])) > 1e-12:
            raise DomainError("a ray must start at the reference potential (g_0 = 0)")
        t.setflags(write=False)
        v.setflags(write=False)
        object.__setattr__(self, "t_grid", t)
        object.__setattr__(self, "values", v)

    @property
    def grid(self):
        return grid_for(self.polytope, self.h)

    @property
    def asymptotic_slope(self) -> np.ndarray:
        """d g_t / dt past the last sample (inf off P)."""
        t, v = self.t_grid, self.values
        with np.errstate(invalid="ignore"):
            d = (v[-1] - v[-2]) / (t[-1] - t[-2])
        return np.where(self.grid.inside, d, np.inf)

    @property
    def sup_slope(self) -> float:
        """Slope of t -> sup r_t = -min_p g_t(p) along the linear continuation."""
        return float(-np.min(self.asymptotic_slope[self.grid.inside]))

    def at(self, t: float) -> np.ndarray:
        """g_t on the grid; linear interpolation between samples, linear continuation beyond."""
        tg, v = self.t_grid, self.values
        if t < 0:
            raise DomainError("rays are defined for t >= 0")
        if t >= tg[-1]:
            with np.errstate(invalid="ignore"):
                out = v[-1] + (t - tg[-1]) * self.asymptotic_slope
            return np.where(self.grid.inside, out, np.inf)
        i = int(np.searchsorted(tg, t, side="right")) - 1
        a = (t - tg[i]) / (tg[i + 1] - tg[i])
        with np.errstate(invalid="ignore"):
            out = (1 - a) * v[i] + a * v[i + 1]
        return np.where(self.grid.inside, out, np.inf)

    def potential(self, t: float) -> DualPotential:
        return DualPotential(self.polytope, self.polytope, self.at(t), self.h)

    def shift(self, c: float) -> "Ray":
        """The ray r_t + c t."""
        return Ray(self.polytope, self.h, self.t_grid, self.values - c * self.t_grid[:, None], self.stable)

    def concavity_defect(self) -> float:
        """Largest violation of concavity of t -> g_t(p) (0 for a valid ray)."""
        t, v = self.t_grid, self.values[:, self.grid.inside]
        if t.size < 3:
            return 0.0
        w = ((t[1:-1] - t[:-2]) / (t[2:] - t[:-2]))[:, None]
        chord = (1 - w) * v[:-2] + w * v[2:]
        return float(max(0.0, np.max(chord - v[1:-1])))

    # ---- construction
    @classmethod
    def geodesic(cls, P: Polytope, speed, h: Optional[float] = None) -> "Ray":
        """g_t = t * speed(p) for a convex speed function (callable on points or node array)."""
        h = default_resolution(P.dim) if h is None else h
        grid = grid_for(P, h)
        ell = np.full(grid.size, np.inf)
        ell[grid.inside] = speed(grid.points[grid.inside]) if callable(speed) else np.asarray(speed)[grid.inside]
        return cls(P, h, np.array([0.0, 1.0]), np.stack([np.where(grid.inside, 0.0, np.inf), ell]))

    @classmethod
    def from_generator(cls, P: Polytope, fn: Callable, h: Optional[float] = None, t_max: float = 64.0,
                       num: int = 65, max_doublings: int = 3, tol: float = 1e-9) -> "Ray":
        """Sample fn(t) -> node values on [0, t_max], doubling t_max until the final slope settles."""
        h = default_resolution(P.dim) if h is None else h
        grid = grid_for(P, h)

        def slope_at(T, dt):
            a = np.asarray(fn(T), dtype=float)[grid.inside]
            b = np.asarray(fn(T - dt), dtype=float)[grid.inside]
            return (a - b) / dt

        T = float(t_max)
        for _ in range(max_doublings + 1):
            dt = T / (num - 1)
            s1, s2 = slope_at(T, dt), slope_at(2 * T, dt)
            if np.max(np.abs(s1 - s2)) <= tol * (1 + np.max(np.abs(s1))):
                t = np.linspace(0.0, T, num)
                vals = np.stack([np.where(grid.inside, np.asarray(fn(x), dtype=float), np.inf) for x in t])
                return cls(P, h, t, vals)
            T *= 2
        raise HorizonError(f"ray slope still changing at t = {T / 2}")

    def to_json(self):
        return {"vertices": self.polytope.vertices.tolist(), "h": self.h, "t_grid": self.t_grid.tolist(),
                "g_samples": [[None if not np.isfinite(x) else float(x) for x in row] for row in self.values]}


# --------------------------------------------------------------------------- body rules

class SublevelRule:
    """Bodies Q_tau = {p in P : level(p) <= -tau} for a convex PL level function on the grid."""

    def __init__(self, grid, level):
        self.grid = grid
        self.level = np.where(grid.inside, np.asarray(level, dtype=float), np.inf)
        inside = self.level[grid.inside]
        self.tau_plus = float(-np.min(inside))
        self.tau_minus = float(-np.max(inside))

    def body(self, tau: float) -> ConvexBody:
        if tau > self.tau_plus + LEVEL_TOL:
            return ConvexBody.empty(self.grid.dim)
        return sublevel_body(self.grid, self.level, -tau + LEVEL_TOL * (1 + abs(tau)))

    def sigma(self, pts) -> np.ndarray:
        """sup{tau : p in Q_tau}."""
        return -self.grid.interpolate(self.level, pts)

    def node_sigma(self) -> np.ndarray:
        return -self.level

    def leave_times(self, pts, radius: float = 0.0) -> np.ndarray:
        """sup{tau : Q_tau meets the closed ball of given radius around each point}."""
        pts = np.asarray(pts, dtype=float).reshape(-1, self.grid.dim)
        out = self.sigma(pts)
        if radius > 0:
            g = self.grid
            nodes = g.points[g.inside]
            lev = self.level[g.inside]
            for i, p in enumerate(pts):
                if g.dim == 1:
                    lo, hi = p[0] - radius, p[0] + radius
                    ends = np.clip([lo, hi], g.axes[0][0], g.axes[0][-1])
                    cand = [np.min(g.interpolate(self.level, ends[:, None]))]
                    near = (nodes[:, 0] >= lo) & (nodes[:, 0] <= hi)
                else:
                    cand = []
                    near = np.linalg.norm(nodes - p, axis=1) <= radius
                if np.any(near):
                    cand.append(np.min(lev[near]))
                if cand:
                    out[i] = max(out[i], -min(cand))
        return out


class FiltrationRule:
    """Bodies Q_tau = conv{points with weight >= tau} (piecewise constant in tau)."""

    def __init__(self, grid, points, weights):
        self.grid = grid
        self.points = np.asarray(points, dtype=float).reshape(-1, grid.dim)
        self.weights = np.asarray(weights, dtype=float).ravel()
        if self.points.shape[0] != self.weights.size or self.weights.size == 0:
            raise ShapeError("one weight per point is required")
        self.levels = np.unique(self.weights)[::-1]
        self.tau_plus = float(self.levels[0])
        self.tau_minus = float(self.levels[-1])
        self._bodies = {}

    def body(self, tau: float) -> ConvexBody:
        i = int(np.searchsorted(-self.levels, -tau + LEVEL_TOL * (1 + abs(tau)), side="right")) - 1
        if i < 0:
            return ConvexBody.empty(self.grid.dim)
        if i not in self._bodies:
            self._bodies[i] = ConvexBody.hull(self.points[self.weights >= self.levels[i]], self.grid.dim)
        return self._bodies[i]

    def node_sigma(self) -> np.ndarray:
        g = self.grid
        sig = np.full(g.size, -np.inf)
        for i in range(self.levels.size - 1, -1, -1):
            inside = self.body(self.levels[i]).contains(g.points, tol=1e-9)
            sig[inside] = self.levels[i]
        return np.where(g.inside, sig, -np.inf)


# --------------------------------------------------------------------------- test curves

@dataclass(frozen=True, eq=False)
class TestCurve:
    """Dual potentials g_tau at the nodes of tau_grid, with bodies given by ``rule``.

    Below tau_grid[0] the curve is the reference potential, so tau_grid
    must start at or below tau_minus; above tau_plus the potential is
    identically -inf.
    """
    __test__ = False

    polytope: Polytope
    h: float
    tau_grid: np.ndarray
    values: np.ndarray
    rule: object

    def __post_init__(self):
        grid = grid_for(self.polytope, self.h)
        tau = np.asarray(self.tau_grid, dtype=float)
        v = np.array(self.values, dtype=float)
        if tau.ndim != 1 or tau.size < 2 or np.any(np.diff(tau) <= 0):
            raise ShapeError("tau_grid must be strictly increasing with at least two nodes")
        if v.shape != (tau.size, grid.size):
            raise ShapeError(f"values must have shape {(tau.size, grid.size)}, got {v.shape}")
        if tau[0] > self.rule.tau_minus + 1e-12:
            raise DomainError("tau_grid must start at or below tau_minus")
        v[:, ~grid.inside] = np.inf
        tau.setflags(write=False)
        v.setflags(write=False)
        object.__setattr__(self, "tau_grid", tau)
        object.__setattr__(self, "values", v)

    @property
    def grid(self):
        return grid_for(self.polytope, self.h)

    @property
    def tau_plus(self) -> float:
        return self.rule.tau_plus

    @property
    def tau_minus(self) -> float:
        return self.rule.tau_minus

    def body(self, tau: float) -> ConvexBody:
        if tau < self.tau_grid[0]:
            return self.polytope
        return self.rule.body(tau)

    def potential(self, i: int) -> DualPotential:
        """The potential at the i-th node of tau_grid."""
        return DualPotential(self.polytope, self.body(self.tau_grid[i]), self.values[i], self.h)

    def monotonicity_defect(self) -> float:
        """Largest decrease of tau -> g_tau(p) (0 when psi_tau is decreasing in tau)."""
        v = self.values
        with np.errstate(invalid="ignore"):
            d = np.diff(v, axis=0)
        d = np.where(np.isnan(d), 0.0, d)
        return float(max(0.0, -np.min(d)))

    @classmethod
    def from_rule(cls, P: Polytope, level, g: Callable, tau_grid, h: Optional[float] = None):
        """Curve with bodies {level <= -tau} and dual values g(points, tau) on them."""
        h = default_resolution(P.dim) if h is None else h
        grid = grid_for(P, h)
        lev = level(grid.points) if callable(level) else np.asarray(level, dtype=float)
        rule = SublevelRule(grid, lev)
        tau_grid = np.asarray(tau_grid, dtype=float)
        tau_grid = tau_grid[tau_grid <= rule.tau_plus + 1e-15]
        vals = np.full((tau_grid.size, grid.size), np.inf)
        for i, tau in enumerate(tau_grid):
            m = grid.inside & (rule.level <= -tau + LEVEL_TOL * (1 + abs(tau)))
            vals[i, m] = g(grid.points[m], tau)
        return cls(P, h, tau_grid, vals, rule)

    @classmethod
    def constant_zero(cls, P: Polytope, h: Optional[float] = None, step: float = 2.0 ** -DYADIC_LEVEL):
        """psi_tau = 0 for tau <= 0 and -inf above."""
        return cls.from_rule(P, lambda p: np.zeros(p.shape[0]), lambda p, tau: np.zeros(p.shape[0]),
                             np.array([-1.0, -step, 0.0]) if step >= 1 else np.arange(-1.0, step / 2, step), h)

    def to_json(self):
        return {"vertices": self.polytope.vertices.tolist(), "h": self.h, "tau_grid": self.tau_grid.tolist(),
                "tau_plus": self.tau_plus, "tau_minus": self.tau_minus,
                "bodies": [self.body(t).to_json() for t in self.tau_grid]}


def dyadic_tau_grid(tau_lo: float, tau_hi: float, level: int = DYADIC_LEVEL) -> np.ndarray:
    """Nodes j / 2^level covering [tau_lo, tau_hi], plus tau_hi itself."""
    step = 2.0 ** -level
    j0 = math.floor(tau_lo / step) - 1
    j1 = math.floor(tau_hi / step)
    nodes = np.arange(j0, j1 + 1) * step
    if nodes[-1] < tau_hi:
        nodes = np.append(nodes, tau_hi)
    return nodes


def hat_values(r: Ray, tau) -> np.ndarray:
    """sup_t (g_t(p) + t tau) on the grid for each tau; +inf where the sup diverges."""
    tau = np.atleast_1d(np.asarray(tau, dtype=float))
    vals = _kernels.conjugate(r.t_grid, -r.values, tau)
    slope = r.asymptotic_slope
    tol = LEVEL_TOL * (1 + np.abs(tau))[:, None]
    diverge = slope[None, :] + tau[:, None] > tol
    vals[diverge] = np.inf
    vals[:, ~r.grid.inside] = np.inf
    return vals


def hat_transform(r: Ray, tau: float) -> DualPotential:
    """The test-curve potential at tau: dual sup_t (g_t + t tau), body {p : asymptotic slope <= -tau}."""
    if not r.stable:
        raise HorizonError("ray was not sampled to a stable horizon")
    rule = SublevelRule(r.grid, r.asymptotic_slope)
    return DualPotential(r.polytope, rule.body(tau), hat_values(r, tau)[0], r.h)


def hat_curve(r: Ray, tau_grid=None, level: int = DYADIC_LEVEL) -> TestCurve:
    """All hat transforms of r on a tau-grid (default: dyadic nodes of the given level)."""
    if not r.stable:
        raise HorizonError("ray was not sampled to a stable horizon")
    rule = SublevelRule(r.grid, r.asymptotic_slope)
    if tau_grid is None:
        tau_grid = dyadic_tau_grid(rule.tau_minus, rule.tau_plus, level)
    tau_grid = np.asarray(tau_grid, dtype=float)
    tau_grid = tau_grid[tau_grid <= rule.tau_plus + 1e-15]
    return TestCurve(r.polytope, r.h, tau_grid, hat_values(r, tau_grid), rule)


def check_values(psi: TestCurve, t) -> np.ndarray:
    """inf_tau (g_tau(p) - t tau) over the tau-grid, for each t."""
    t = np.atleast_1d(np.asarray(t, dtype=float))
    out = -_kernels.conjugate(psi.tau_grid, psi.values, t)
    out[:, ~psi.grid.inside] = np.inf
    return out


def check_transform(psi: TestCurve, t: float) -> DualPotential:
    """The ray potential at time t: dual inf_tau (g_tau - t tau)."""
    return DualPotential(psi.polytope, psi.polytope, check_values(psi, t)[0], psi.h)


def check_ray(psi: TestCurve, t_grid) -> Ray:
    """check_transform sampled on t_grid, as a Ray."""
    t_grid = np.asarray(t_grid, dtype=float)
    vals = check_values(psi, t_grid)
    vals[0] = np.where(psi.grid.inside, 0.0, np.inf)
    return Ray(psi.polytope, psi.h, t_grid, vals)


def shifted_curve(psi: TestCurve, c: float) -> TestCurve:
    """tau -> psi_{tau - c}."""
    rule = psi.rule
    if isinstance(rule, SublevelRule):
        new_rule = SublevelRule(rule.grid, rule.level - c)
    else:
        new_rule = FiltrationRule(rule.grid, rule.points, rule.weights + c)
    return TestCurve(psi.polytope, psi.h, psi.tau_grid + c, psi.values, new_rule)


# --------------------------------------------------------------------------- energies

class MassCurve:
    """tau -> mass(psi_tau), evaluated from the exact bodies."""

    def __init__(self, psi: TestCurve):
        self.psi = psi
        self.tau_plus = psi.tau_plus

    def __call__(self, tau):
        tau = np.asarray(tau, dtype=float)
        n = self.psi.polytope.dim
        out = np.array([0.0 if t > self.tau_plus + 1e-15 else math.factorial(n) * self.psi.body(t).volume
                        for t in tau.ravel()])
        return out.reshape(tau.shape) if tau.ndim else float(out[0])


def mass_curve(psi: TestCurve) -> MassCurve:
    return MassCurve(psi)


@dataclass(frozen=True)
class EnergySlope:
    linear: float
    integral: float
    riemann: float
    riemann_lower: float
    riemann_upper: float

    @property
    def values(self):
        return (self.linear, self.integral, self.riemann)

    @property
    def deviation(self) -> float:
        v = self.values
        return max(abs(a - b) for a in v for b in v)


def _energy_from_masses(psi: TestCurve, level: int):
    V = total_mass(psi.polytope)
    tp, tm = psi.tau_plus, psi.tau_minus
    curve = mass_curve(psi)
    if abs(curve(psi.tau_grid[0]) - V) > 1e-9 * V:
        raise FiniteEnergyError("test curve is not bounded below on its tau-grid")
    step = 2.0 ** -level
    M = math.floor((tm - tp) / step) - 1
    j = np.arange(M, 1)
    taus = tp + j * step
    dm = curve(taus) / V - 1.0
    integral = float(np.sum(0.5 * step * (dm[1:] + dm[:-1])) + tp)
    lower = float(step * np.sum(dm[1:]) + tp)
    upper = float(step * np.sum(dm[:-1]) + tp)
    return integral, lower, upper


def ray_energy_slope(r: Ray, level: int = DYADIC_LEVEL) -> EnergySlope:
    """Energy slope of a ray by linearity, by the mass integral of its test curve, and by dyadic Riemann sums."""
    rule = SublevelRule(r.grid, r.asymptotic_slope)
    psi = hat_curve(r, tau_grid=np.array([rule.tau_minus - 1.0, rule.tau_plus]))
    linear = energy_I(r.potential(1.0))
    integral, lower, upper = _energy_from_masses(psi, level)
    return EnergySlope(linear, integral, 0.5 * (lower + upper), lower, upper)


def curve_energy(psi: TestCurve, level: int = DYADIC_LEVEL) -> float:
    """int (mass(psi_tau)/V - 1) dtau + tau_plus for a bounded test curve."""
    return _energy_from_masses(psi, level)[0]


@dataclass(frozen=True)
class ChordalEstimate:
    value: float
    quotient: float
    times: tuple
    quotients: tuple


def chordal_d1c(r1: Ray, r2: Ray, t_max: Optional[float] = None, n_levels: int = 6,
                tol: float = 1e-9) -> ChordalEstimate:
    """Slope at infinity of t -> d1(r1_t, r2_t) from difference quotients at t_max / 2^j."""
    if r1.polytope.key != r2.polytope.key or r1.h != r2.h:
        raise ShapeError("rays live on different polytopes or grids")
    if t_max is None:
        t_max = max(r1.t_grid[-1], r2.t_grid[-1], 1.0) * 4
    times = t_max / 2.0 ** np.arange(n_levels - 1, -1, -1)
    q = np.array([d1_distance(r1.potential(t), r2.potential(t)) / t for t in times])
    if np.any(np.diff(q) < -tol * (1 + np.max(np.abs(q)))):
        raise HorizonError("difference quotients are not yet monotone")
    limit = 2 * q[-1] - q[-2]
    return ChordalEstimate(float(limit), float(q[-1]), tuple(times), tuple(q))


# --------------------------------------------------------------------------- filtrations

def from_filtration(P: Polytope, k: int, weights, h: Optional[float] = None, tau_grid=None) -> TestCurve:
    """Test curve with bodies conv{alpha/k : weight_alpha >= k tau} and dual 0 on them.

    ``weights`` is an array aligned with ``lattice_points(P, k)`` or a
    callable alpha -> weight.
    """
    h = default_resolution(P.dim) if h is None else h
    grid = grid_for(P, h)
    alphas = lattice_points(P, k)
    w = np.asarray([weights(a) for a in alphas] if callable(weights) else weights, dtype=float).ravel()
    if w.size != alphas.shape[0]:
        raise ShapeError(f"expected {alphas.shape[0]} weights, got {w.size}")
    rule = FiltrationRule(grid, alphas / k, w / k)
    if not rule.body(rule.tau_minus).same_as(P, tol=1e-9):
        raise DomainError("lattice points of kP do not span P")
    if tau_grid is None:
        step = 2.0 ** -DYADIC_LEVEL
        tau_grid = np.union1d(dyadic_tau_grid(rule.tau_minus, rule.tau_plus, DYADIC_LEVEL - 4), rule.levels)
        tau_grid = np.union1d(tau_grid, rule.levels - step)
        tau_grid = tau_grid[tau_grid <= rule.tau_plus]
    tau_grid = np.asarray(tau_grid, dtype=float)
    sig = rule.node_sigma()
    vals = np.where(sig[None, :] >= tau_grid[:, None] - LEVEL_TOL, 0.0, np.inf)
    return TestCurve(P, h, tau_grid, vals, rule)


def random_test_curve(rng, P: Polytope, h: Optional[float] = None, tau_step: float = 2.0 ** -DYADIC_LEVEL,
                      n_level_pieces: int = 3, n_hinges: int = 3) -> TestCurve:
    """Random PL test curve: bodies {ell <= -tau} for a convex PL ell, dual sum_i w_i (<a_i, p> + c_i + tau)_+."""
    h = default_resolution(P.dim) if h is None else h
    grid = grid_for(P, h)
    n = P.dim
    B = rng.uniform(-1.0, 1.0, size=(n_level_pieces, n))
    d = rng.uniform(-0.5, 0.5, size=n_level_pieces)
    ell = np.max(grid.points @ B.T + d, axis=1)
    tau_minus = -float(np.max(ell[grid.inside]))
    A = rng.uniform(-1.0, 1.0, size=(n_hinges, n))
    w = rng.uniform(0.2, 1.0, size=n_hinges)
    top = np.max(P.vertices @ A.T, axis=0)
    c = -tau_minus - top - rng.uniform(0.0, 0.3, size=n_hinges)

    def g(pts, tau):
        return np.maximum(0.0, pts @ A.T + c + tau) @ w

    tau_plus = -float(np.min(ell[grid.inside]))
    lo = math.floor(tau_minus / tau_step) - 1
    hi = math.floor(tau_plus / tau_step)
    taus = np.arange(lo, hi + 1) * tau_step
    if taus[-1] < tau_plus:
        taus = np.append(taus, tau_plus)
    return TestCurve.from_rule(P, ell, g, taus, h)


def curve_check_horizon(psi: TestCurve) -> float:
    """A time after which the check transform of psi is affine in t."""
    v = psi.values
    with np.errstate(invalid="ignore"):
        d = np.diff(v, axis=0) / np.diff(psi.tau_grid)[:, None]
    d = d[np.isfinite(d)]
    return float(np.max(d, initial=0.0)) + 1.0


@dataclass(frozen=True)
class InvolutionReport:
    curve_error: float
    ray_error: float
    support_mismatch: int


def involution_errors(psi: TestCurve, t_step: float = 1.0 / 256) -> InvolutionReport:
    """Round trips psi -> check -> hat and r -> hat -> check, compared where both sides are finite.

    The curve comparison skips the top tau node, whose body may collapse
    differently after a round trip.
    """
    T = curve_check_horizon(psi)
    t_grid = np.linspace(0.0, T, int(math.ceil(T / t_step)) + 1)
    r = check_ray(psi, t_grid)
    back = hat_curve(r, psi.tau_grid)
    n = min(back.tau_grid.size, psi.tau_grid.size) - 1
    a, b = psi.values[:n], back.values[:n]
    both = np.isfinite(a) & np.isfinite(b)
    err_curve = float(np.max(np.abs(a[both] - b[both]), initial=0.0))
    again = check_ray(back, t_grid)
    inside = r.grid.inside
    err_ray = float(np.max(np.abs(again.values[:, inside] - r.values[:, inside])))
    return InvolutionReport(err_curve, err_ray, int(np.count_nonzero(np.isfinite(a) != np.isfinite(b))))
