"""Quantized functionals: Hilbert maps, L_k, section counts and their non-Archimedean versions.

Sections of the degree-k space are the lattice points of kP.  The Hilbert
map of a potential is diagonal in this basis; its entries are weighted
Laplace-type integrals, computed here in log space at n=1.  Section
counting works at n=1 and n=2.
"""
from __future__ import annotations

import csv
import io
import math
import warnings
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from scipy.special import logsumexp

from .errors import (ConvergenceWarning, DomainError, FiniteEnergyError, PositivityWarning, ShapeError,
                     UnsupportedDimensionError)
from .geometry import ConvexBody, Polytope, facet_flags, lattice_points
from .herm import HermitianMetric, MetricFamily, exponent
from .raycurve import FiltrationRule, Ray, SublevelRule, TestCurve, hat_curve
from .toricpotential import DualPotential, d1_distance, energy_I, i_envelope, mass, total_mass

# distance (in units of 1/margin) beyond which the reference density is exactly exponential in double precision
_TAIL_SPAN = 40.0
_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(8)


# --------------------------------------------------------------------------- section spaces

@dataclass(frozen=True, eq=False)
class SectionSpace:
    k: int
    polytope: Polytope
    lattice_points: np.ndarray
    twist_margin: float = 0.0

    @classmethod
    def of(cls, P: Polytope, k: int, twist_margin: float = 0.0) -> "SectionSpace":
        if int(k) != k or k < 1:
            raise DomainError("k must be a positive integer")
        if twist_margin < 0:
            raise DomainError("twist_margin must be non-negative")
        return cls(int(k), P, lattice_points(P, int(k)), float(twist_margin))

    @property
    def dim(self) -> int:
        return int(self.lattice_points.shape[0])


def reference_margin(P: Polytope) -> float:
    """Exponential decay rate of the reference measure's tails (the length of P at n=1)."""
    if P.dim != 1:
        raise UnsupportedDimensionError("the Hilbert map is implemented for n = 1 only")
    lo, hi = P.vertices[:, 0].min(), P.vertices[:, 0].max()
    return float(hi - lo)


# --------------------------------------------------------------------------- Hilbert map (n = 1)

def _lower_hull(p, g):
    """Vertices of the lower convex hull of sorted points (p_i, g_i)."""
    keep = []
    for i in range(p.size):
        while len(keep) >= 2:
            a, b = keep[-2], keep[-1]
            if (g[b] - g[a]) * (p[i] - p[a]) >= (g[i] - g[a]) * (p[b] - p[a]):
                keep.pop()
            else:
                break
        keep.append(i)
    return p[keep], g[keep]


class _Primal1D:
    """x -> sup_p (p x - g(p)) for a dual sampled on a 1-D grid, stored by its affine pieces."""

    def __init__(self, u: DualPotential):
        pts = u.grid.points[:, 0]
        fin = u.finite
        if not np.any(fin):
            raise FiniteEnergyError("the potential is identically -inf")
        self.p, self.g = _lower_hull(pts[fin], u.values[fin])
        self.kinks = np.diff(self.g) / np.diff(self.p) if self.p.size > 1 else np.zeros(0)

    def __call__(self, x):
        j = np.searchsorted(self.kinks, x, side="left")
        return self.p[j] * x - self.g[j]


def _log_reference_density(x, a, b):
    """log of the second derivative of log(e^{ax} + e^{bx})."""
    m = b - a
    z = m * x
    return 2.0 * np.log(m) - np.logaddexp(0.0, z) - np.logaddexp(0.0, -z)


def _panels(breaks, lo, hi, max_len):
    edges = np.unique(np.concatenate([[lo, hi], breaks[(breaks > lo) & (breaks < hi)]]))
    out = [lo]
    for a, b in zip(edges[:-1], edges[1:]):
        n = max(1, int(math.ceil((b - a) / max_len)))
        out.extend(np.linspace(a, b, n + 1)[1:])
    return np.asarray(out)


def _log_moments(phi: _Primal1D, alphas, k, a, b, max_len):
    m = b - a
    kinks = phi.kinks
    lo = min(kinks.min() if kinks.size else 0.0, 0.0) - _TAIL_SPAN / m
    hi = max(kinks.max() if kinks.size else 0.0, 0.0) + _TAIL_SPAN / m
    edges = _panels(kinks, lo, hi, max_len)
    half = 0.5 * np.diff(edges)
    mid = 0.5 * (edges[1:] + edges[:-1])
    x = (mid[:, None] + half[:, None] * _GL_NODES[None, :]).ravel()
    logw = (np.log(half)[:, None] + np.log(_GL_WEIGHTS)[None, :]).ravel()
    base = logw + _log_reference_density(x, a, b) - k * phi(x)
    inner = logsumexp(base[None, :] + alphas[:, None] * x[None, :], axis=1)

    # exponential tails: past the window the integrand is exactly exp(c + s x)
    q_hi, g_hi = phi.p[-1], phi.g[-1]
    q_lo, g_lo = phi.p[0], phi.g[0]
    s_right = alphas - k * q_hi - m
    s_left = alphas - k * q_lo + m
    with np.errstate(divide="ignore"):
        e_right = alphas * hi - k * (q_hi * hi - g_hi) + _log_reference_density(hi, a, b)
        e_left = alphas * lo - k * (q_lo * lo - g_lo) + _log_reference_density(lo, a, b)
        right = np.where(s_right < 0, e_right - np.log(np.abs(s_right)), np.inf)
        left = np.where(s_left > 0, e_left - np.log(np.abs(s_left)), np.inf)
    out = np.logaddexp(np.logaddexp(inner, right), left)
    out[(s_right >= 0) | (s_left <= 0)] = np.inf
    return out


def hilbert_log_diagonal(u: DualPotential, k: int, rtol: float = 1e-10, max_refinements: int = 6):
    """(alphas, log N_alpha) for the Hilbert map of u at level k; +inf marks a divergent integral.

    N_alpha = int exp(alpha x - k phi_u(x)) mu_0(dx), with mu_0 the Monge-Ampere
    measure of log(e^{ax} + e^{bx}) on P = [a, b].
    """
    P = u.polytope
    if P.dim != 1:
        raise UnsupportedDimensionError("the Hilbert map is implemented for n = 1 only")
    a, b = P.vertices[:, 0].min(), P.vertices[:, 0].max()
    alphas = lattice_points(P, k)[:, 0].astype(float)
    phi = _Primal1D(u)
    slope_scale = k * max(abs(a), abs(b)) + np.max(np.abs(alphas)) + (b - a)
    max_len = 1.0 / slope_scale
    prev = _log_moments(phi, alphas, k, a, b, max_len)
    fin = np.isfinite(prev)
    for _ in range(max_refinements):
        max_len /= 2
        cur = _log_moments(phi, alphas, k, a, b, max_len)
        change = np.max(np.abs(cur[fin] - prev[fin]), initial=0.0)
        prev = cur
        if change < rtol:
            break
    else:
        warnings.warn(f"Hilbert quadrature change {change:.2e} above {rtol:.0e}", ConvergenceWarning, stacklevel=2)
    return alphas.astype(int), prev


def hilbert_map(u: DualPotential, k: int) -> HermitianMetric:
    """Diagonal Hilbert metric over the integrable sections of level k."""
    _, logn = hilbert_log_diagonal(u, k)
    fin = np.isfinite(logn)
    if np.any(logn[fin] > 700):
        raise DomainError("Hilbert entries overflow double precision; use hilbert_log_diagonal")
    return HermitianMetric.diagonal(np.exp(logn[fin]))


def _log_ratio(u: DualPotential, k: int, ref_logn=None) -> np.ndarray:
    _, logn = hilbert_log_diagonal(u, k)
    if not np.all(np.isfinite(logn)):
        raise FiniteEnergyError("some sections are not integrable against this potential")
    if ref_logn is None:
        ref_logn = hilbert_log_diagonal(DualPotential.reference(u.polytope, u.h), k)[1]
    return logn - ref_logn


def Lk(u: DualPotential, k: int, ref_logn=None) -> float:
    """-(1/(kV)) sum_alpha log(N_alpha(u) / N_alpha(reference))."""
    return float(-np.sum(_log_ratio(u, k, ref_logn)) / (k * total_mass(u.polytope)))


def d1k(u: DualPotential, v: DualPotential, k: int) -> float:
    """(1/k) times the d1 distance between the Hilbert metrics of u and v."""
    lu = _log_ratio(u, k)
    lv = _log_ratio(v, k)
    # diagonal metrics: relative eigenvalues are the entry ratios
    return float(np.mean(np.abs(lu - lv)) / k)


# --------------------------------------------------------------------------- counting

def _counts_mask(body: ConvexBody, P: Polytope, alphas, k: int, margin: float) -> np.ndarray:
    if body.is_empty:
        return np.zeros(alphas.shape[0], dtype=bool)
    A, b, on_p = facet_flags(body, P)
    lhs = alphas @ A.T
    tol = 1e-9 * k * max(1.0, float(np.max(np.abs(b))))
    closed = lhs <= k * b + tol
    open_ = lhs < k * b + margin - tol
    return np.all(np.where(on_p[None, :], closed, open_), axis=1)


def h0_count(u: DualPotential, k: int, twist_margin: float = 0.0) -> int:
    """Number of lattice points of kP whose sections are integrable against e^{-ku}.

    Facets of the body that lie on the boundary of P are closed; the other
    facets are open, relaxed outward by twist_margin / k.
    """
    if u.is_empty:
        return 0
    space = SectionSpace.of(u.polytope, k, twist_margin)
    return int(np.count_nonzero(_counts_mask(u.body, u.polytope, space.lattice_points, k, twist_margin)))


@dataclass(frozen=True)
class BonaveroRow:
    k: int
    ratio: float
    mass: float
    envelope_mass: float


def bonavero_table(u: DualPotential, k_list: Sequence[int], twist_margin: float = 0.0):
    """Rows (k, n! h0 / k^n, mass(u), mass(i_envelope(u)))."""
    n = u.dim
    env = mass(i_envelope(u))
    m = mass(u)
    return [BonaveroRow(int(k), math.factorial(n) * h0_count(u, k, twist_margin) / k ** n, m, env) for k in k_list]


# --------------------------------------------------------------------------- count steps and L_k^NA

@dataclass(frozen=True)
class CountStep:
    """Right-open step function: counts[0] below jump_locations[0], counts[j] on (jump_{j-1}, jump_j]."""
    jump_locations: np.ndarray
    counts: np.ndarray
    k: int
    leave_times: np.ndarray = field(repr=False)

    @property
    def total(self) -> int:
        return int(self.counts[0])

    def at(self, tau) -> np.ndarray:
        tau = np.asarray(tau, dtype=float)
        return np.count_nonzero(self.leave_times[None, :] >= tau.reshape(-1, 1), axis=1).reshape(tau.shape)

    def to_json(self):
        return {"k": self.k, "jump_locations": self.jump_locations.tolist(), "counts": self.counts.tolist()}


def leave_times(psi: TestCurve, k: int, twist_margin: float = 0.0) -> np.ndarray:
    """For each lattice point of kP, the largest tau at which its section still counts for psi_tau."""
    P = psi.polytope
    alphas = lattice_points(P, k)
    rule = psi.rule
    if isinstance(rule, SublevelRule):
        return rule.leave_times(alphas / k, radius=twist_margin / k)
    if isinstance(rule, FiltrationRule):
        out = np.full(alphas.shape[0], -np.inf)
        for level in rule.levels[::-1]:
            ok = _counts_mask(rule.body(level), P, alphas, k, twist_margin)
            out[ok] = level
        return out
    raise ShapeError(f"unsupported body rule {type(rule).__name__}")


def count_step(psi: TestCurve, k: int, twist_margin: float = 0.0) -> CountStep:
    lt = leave_times(psi, k, twist_margin)
    if not np.all(np.isfinite(lt)):
        raise FiniteEnergyError("some sections never count; the curve is not bounded below")
    jumps, drops = np.unique(lt, return_counts=True)
    counts = np.concatenate([[lt.size], lt.size - np.cumsum(drops)])
    return CountStep(jumps, counts.astype(int), int(k), np.sort(lt))


def lkna(psi: TestCurve, k: int, twist_margin: float = 0.0) -> float:
    """-(1/V) sum_j tau_j (counts[j+1] - counts[j]) over the jumps of the count step."""
    step = count_step(psi, k, twist_margin)
    drops = step.counts[:-1] - step.counts[1:]
    return float(np.sum(step.jump_locations * drops) / total_mass(psi.polytope))


def lkna_integral(psi: TestCurve, k: int, twist_margin: float = 0.0) -> float:
    """(1/V)(N_k tau_top + int_{-inf}^{tau_top} (h0(tau) - N_k) dtau), evaluated exactly on the steps."""
    step = count_step(psi, k, twist_margin)
    top = max(psi.tau_plus, float(step.jump_locations[-1]))
    edges = np.append(step.jump_locations, top)
    integral = float(np.sum((step.counts[1:] - step.total) * np.diff(edges)))
    return (step.total * top + integral) / total_mass(psi.polytope)


# --------------------------------------------------------------------------- bridges

def _regularized(r: Ray, t: float, eps: float) -> DualPotential:
    u = r.potential(t)
    if eps == 0:
        return u
    p = u.grid.points[:, 0]
    c = p.mean()
    return u.with_values(u.values + eps * (p - c) ** 2)


def lk_ray_slope(r: Ray, k: int, t_max: float = 64.0, num: int = 17, eps: float = 0.0,
                 tol: float = 1e-8) -> float:
    """Tail slope of t -> Lk(r_t), least squares over [t_max / 2, t_max].

    ``eps`` adds the bounded strictly convex term eps (p - c)^2 to every
    dual, which leaves the slope unchanged.
    """
    ref = hilbert_log_diagonal(DualPotential.reference(r.polytope, r.h), k)[1]
    t = np.linspace(0.0, t_max, num)
    vals = np.array([Lk(_regularized(r, x, eps), k, ref) for x in t])
    second = vals[1:-1] - 0.5 * (vals[:-2] + vals[2:])
    if np.any(second > tol * (1 + np.max(np.abs(vals)))):
        warnings.warn("t -> Lk(r_t) is not convex on the samples", PositivityWarning, stacklevel=2)
    tail = t >= t_max / 2
    return float(np.polyfit(t[tail], vals[tail], 1)[0])


def exponent_bridge_table(r: Ray, k: int, s_max: float = 256.0, num: int = 65,
                          twist_margin: Optional[float] = None):
    """exponent_bridge pairs for every lattice point of kP, as an array of shape (m, 2)."""
    P = r.polytope
    margin = reference_margin(P) if twist_margin is None else twist_margin
    s = np.linspace(0.0, s_max, num)
    logn = np.stack([hilbert_log_diagonal(r.potential(x), k)[1] for x in s])
    if not np.all(np.isfinite(logn)):
        raise FiniteEnergyError("some section is not integrable along the ray")
    lt = leave_times(hat_curve(r), k, margin)
    out = np.empty((logn.shape[1], 2))
    for j in range(logn.shape[1]):
        col = logn[:, j]
        # remove the chord slope so the 1x1 metrics stay representable
        q = (col[-1] - col[0]) / s_max
        fam = MetricFamily.sampled(s, np.exp(col - col[0] - q * s)[:, None, None])
        out[j, 0] = exponent(fam, np.ones(1)) + q
        out[j, 1] = -k * min(float(lt[j]), 0.0)
    return out


def exponent_bridge(r: Ray, k: int, alpha, **kw):
    """(growth exponent of s -> N_alpha(r_s), -k sup{lam < 0 : alpha integrable against k r_hat_lam}).

    The count uses the reference margin by default, matching the
    integrability of the Hilbert entries.
    """
    alphas = lattice_points(r.polytope, k)
    idx = np.flatnonzero(np.all(alphas == np.atleast_1d(alpha), axis=1))
    if idx.size != 1:
        raise DomainError(f"{alpha} is not a lattice point of {k}P")
    growth, jump = exponent_bridge_table(r, k, **kw)[int(idx[0])]
    return float(growth), float(jump)


def lk_ray_bridge(r: Ray, k: int, **kw):
    """(lk_ray_slope, lkna of the hat curve with the reference margin)."""
    margin = reference_margin(r.polytope)
    return lk_ray_slope(r, k, **kw), lkna(hat_curve(r), k, margin)


def ina(r: Ray, k_list: Sequence[int] = (8, 16, 32, 64, 128), twist_margin: float = 0.0,
        tol: float = 1e-3) -> float:
    """Limit of (n!/k^n) lkna(hat r, k) from a least-squares fit a + b/k over k_list."""
    psi = hat_curve(r)
    n = r.polytope.dim
    ks = np.asarray(k_list, dtype=float)
    vals = np.array([math.factorial(n) * lkna(psi, int(k), twist_margin) / k ** n for k in ks])
    X = np.stack([np.ones_like(ks), 1.0 / ks], 1)
    coef, *_ = np.linalg.lstsq(X, vals, rcond=None)
    resid = vals - X @ coef
    if np.max(np.abs(resid)) > tol:
        warnings.warn(f"a + b/k fit residual {np.max(np.abs(resid)):.2e}", ConvergenceWarning, stacklevel=2)
    return float(coef[0])


# --------------------------------------------------------------------------- tables

@dataclass(frozen=True)
class ConvergenceRow:
    k: int
    value: float
    target: float

    @property
    def error(self) -> float:
        return abs(self.value - self.target)


def quantization_table(u: DualPotential, k_list: Sequence[int]):
    """(n!/k^n) Lk(u) against energy_I(u)."""
    target = energy_I(u)
    n = u.dim
    return [ConvergenceRow(int(k), math.factorial(n) * Lk(u, k) / k ** n, target) for k in k_list]


def d1k_table(u: DualPotential, v: DualPotential, k_list: Sequence[int]):
    target = d1_distance(u, v)
    return [ConvergenceRow(int(k), d1k(u, v, k), target) for k in k_list]


def rows_to_csv(rows) -> str:
    """CSV text with columns k, value, target, error (or the fields of Bonavero rows)."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    if rows and isinstance(rows[0], BonaveroRow):
        w.writerow(["k", "ratio", "mass", "envelope_mass"])
        for r in rows:
            w.writerow([r.k, repr(float(r.ratio)), repr(float(r.mass)), repr(float(r.envelope_mass))])
    else:
        w.writerow(["k", "value", "target", "error"])
        for r in rows:
            w.writerow([r.k, repr(float(r.value)), repr(float(r.target)), repr(float(r.error))])
    return buf.getvalue()
