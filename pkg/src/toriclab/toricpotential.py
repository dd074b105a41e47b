"""Torus-invariant potentials encoded by convex dual functions on a polytope.

A potential is stored through its dual g: a convex function on a body
Q inside the moment polytope P, +inf off Q, sampled on a regular grid.
The potential itself is the convex function x -> sup_{p in Q} (<p, x> - g(p)).
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from . import _kernels
from .errors import ConvexityError, FiniteEnergyError, ShapeError, UnsupportedDimensionError
from .geometry import (ConvexBody, Grid, Polytope, VOLUME_TOL, default_resolution, grid_for,
                       parse_number)

CONVEXITY_RTOL = 1e-9


def _convexity_defect_1d(x, f):
    """Most negative normalized second divided difference of samples f(x)."""
    if x.size < 3:
        return 0.0
    s = np.diff(f) / np.diff(x)
    dd = np.diff(s)
    scale = 1.0 + np.max(np.abs(s))
    return float(max(0.0, -np.min(dd)) / scale)


def _convexity_defect_grid(grid: Grid, values) -> float:
    """Convexity check on node triples along the grid directions."""
    finite = np.isfinite(values) & grid.inside
    if grid.dim == 1:
        x = grid.points[finite, 0]
        return _convexity_defect_1d(x, values[finite])
    f = np.where(finite, values, np.nan).reshape(grid.shape)
    worst = 0.0
    slopes = np.nanmax(np.abs(np.diff(f, axis=0))) / grid.steps[0] if f.shape[0] > 1 else 0.0
    scale = 1.0 + (0.0 if np.isnan(slopes) else slopes)
    for arr in (f, f.T, _diagonals(f)):
        mid = arr[..., 1:-1]
        dd = arr[..., :-2] + arr[..., 2:] - 2 * mid
        with np.errstate(invalid="ignore"):
            m = np.nanmin(dd) if np.any(np.isfinite(dd)) else 0.0
        worst = max(worst, -m / (scale * grid.resolution))
    return worst


def _diagonals(f):
    """Stack anti-diagonal triples (i+1, j-1), (i, j), (i-1, j+1) as rows of length 3."""
    a = f[2:, :-2]
    b = f[1:-1, 1:-1]
    c = f[:-2, 2:]
    return np.stack([a.ravel(), b.ravel(), c.ravel()], 1)


@dataclass(frozen=True, eq=False)
class DualPotential:
    """Convex dual g on a body Q inside the polytope P, sampled on the grid of P.

    ``values`` has one entry per grid node: g at nodes of Q, +inf
    elsewhere.  An empty body is the sentinel for the potential
    identically -inf.
    """
    polytope: Polytope
    body: ConvexBody
    values: np.ndarray
    h: float

    def __post_init__(self):
        grid = grid_for(self.polytope, self.h)
        v = np.array(self.values, dtype=float).ravel()
        if v.shape != (grid.size,):
            raise ShapeError(f"expected {grid.size} grid values, got {v.shape}")
        if self.body.dim != self.polytope.dim:
            raise ShapeError("body and polytope dimensions differ")
        v[~grid.inside] = np.inf
        v.setflags(write=False)
        object.__setattr__(self, "values", v)
        object.__setattr__(self, "h", float(self.h))

    # ---- construction
    @classmethod
    def from_function(cls, P: Polytope, g: Optional[Callable] = None, body: Optional[ConvexBody] = None,
                      h: Optional[float] = None, check: bool = True):
        """Sample g (a vectorized callable on (m, n) points, default 0) on the nodes of body."""
        h = default_resolution(P.dim) if h is None else h
        grid = grid_for(P, h)
        body = P if body is None else body.intersect(P)
        mask = body.contains(grid.points, tol=1e-9) & grid.inside
        vals = np.full(grid.size, np.inf)
        if np.any(mask):
            vals[mask] = 0.0 if g is None else np.asarray(g(grid.points[mask]), dtype=float).ravel()
        if check and _convexity_defect_grid(grid, vals) > 1e-7:
            raise ConvexityError("dual function is not convex on the grid")
        return cls(P, ConvexBody(body.vertices, body.dim), vals, h)

    @classmethod
    def reference(cls, P: Polytope, h: Optional[float] = None):
        return cls.from_function(P, None, None, h)

    @classmethod
    def from_pieces(cls, P: Polytope, pieces, body=None, h=None):
        """g = max of affine pieces [a_1, (a_2,) b] meaning <a, p> + b."""
        pieces = np.asarray(pieces, dtype=float).reshape(len(pieces), -1)
        A, b = pieces[:, :-1], pieces[:, -1]
        return cls.from_function(P, lambda p: np.max(p @ A.T + b, axis=1), body, h)

    @property
    def grid(self) -> Grid:
        return grid_for(self.polytope, self.h)

    @property
    def dim(self) -> int:
        return self.polytope.dim

    @property
    def finite(self) -> np.ndarray:
        return np.isfinite(self.values)

    @property
    def is_empty(self) -> bool:
        return self.body.is_empty

    @property
    def is_full(self) -> bool:
        return self.body.volume >= self.polytope.volume * (1 - 1e-12) - VOLUME_TOL

    def shift(self, c: float) -> "DualPotential":
        """The potential u + c, i.e. dual g - c."""
        return DualPotential(self.polytope, self.body, self.values - c, self.h)

    def with_values(self, values, body=None) -> "DualPotential":
        return DualPotential(self.polytope, self.body if body is None else body, values, self.h)

    def sup_value(self) -> float:
        """sup of the potential relative to the reference, i.e. -min g."""
        if self.is_empty:
            return -np.inf
        return float(-np.min(self.values[self.finite]))

    def check_convex(self, tol: float = 1e-7) -> bool:
        return _convexity_defect_grid(self.grid, self.values) <= tol

    def to_json(self) -> dict:
        return {
            "vertices": self.polytope.vertices.tolist(),
            "body_vertices": self.body.vertices.tolist(),
            "h": self.h,
            "g_samples": [None if not np.isfinite(x) else float(x) for x in self.values],
        }

    @classmethod
    def from_json(cls, obj):
        P = Polytope(obj["vertices"])
        h = float(obj.get("h", default_resolution(P.dim)))
        body = None
        if obj.get("body_vertices") is not None:
            bv = [[parse_number(c) for c in np.atleast_1d(p)] for p in obj["body_vertices"]]
            body = ConvexBody.hull(np.asarray(bv, dtype=float), P.dim)
        if obj.get("g_samples") is not None:
            vals = np.array([np.inf if x is None else float(x) for x in obj["g_samples"]])
            return cls(P, body if body is not None else P, vals, h)
        if obj.get("g_pl_pieces") is not None:
            return cls.from_pieces(P, [[parse_number(c) for c in row] for row in obj["g_pl_pieces"]], body, h)
        return cls.from_function(P, None, body, h)


def _require_same(u: DualPotential, v: DualPotential):
    if u.polytope.key != v.polytope.key or u.h != v.h:
        raise ShapeError("potentials live on different polytopes or grids")


def primal_eval(u: DualPotential, x) -> np.ndarray:
    """sup_{p in Q} (<p, x> - g(p)) over the grid nodes of Q.

    ``x`` is a scalar or an array of points; returns -inf for the empty body.
    """
    n = u.dim
    x = np.asarray(x, dtype=float)
    scalar = x.ndim == 0 or (n == 2 and x.ndim == 1)
    pts = x.reshape(-1, n)
    m = u.finite
    if not np.any(m):
        out = np.full(pts.shape[0], -np.inf)
    elif n == 1:
        out = _kernels.conjugate_1d(u.grid.points[m, 0], u.values[m], pts[:, 0])
    else:
        p, g = u.grid.points[m], u.values[m]
        out = np.empty(pts.shape[0])
        step = max(1, (1 << 22) // p.shape[0])
        for s in range(0, pts.shape[0], step):
            out[s:s + step] = np.max(pts[s:s + step] @ p.T - g[None, :], axis=1)
    return float(out[0]) if scalar else out


def primal_on_grid(u: DualPotential, x_axes) -> np.ndarray:
    """Primal values on a product grid (separable transform); shape (len(x1),) or (len(x1), len(x2))."""
    grid = u.grid
    if u.dim == 1:
        return primal_eval(u, np.asarray(x_axes[0] if isinstance(x_axes, (tuple, list)) else x_axes))
    x1, x2 = (np.asarray(a, dtype=float) for a in x_axes)
    p1, p2 = grid.axes
    g = u.values.reshape(grid.shape)
    inner = _kernels.conjugate(p2, g.T, x2)          # (n_x2, n_p1): sup_{p2} (p2 x2 - g)
    return _kernels.conjugate(p1, -inner.T, x1)      # (n_x1, n_x2)


def legendre_dual(x, f, P: Polytope, h: Optional[float] = None, tol: float = 1e-7) -> DualPotential:
    """Discrete Legendre transform of convex samples f on an x-grid, restricted to P.

    At n=1 ``x`` is an increasing array; at n=2 it is a pair of axes and
    ``f`` has shape (len(x1), len(x2)).  The body is the range of the
    sampled gradient, intersected with P.
    """
    h = default_resolution(P.dim) if h is None else h
    grid = grid_for(P, h)
    f = np.asarray(f, dtype=float)
    if P.dim == 1:
        x = np.asarray(x, dtype=float).ravel()
        if x.size < 3 or np.any(np.diff(x) <= 0):
            raise ShapeError("need an increasing x-grid with at least 3 points")
        if _convexity_defect_1d(x, f) > tol:
            raise ConvexityError("sampled function is not convex")
        slopes = np.diff(f) / np.diff(x)
        grad = ConvexBody.hull(np.array([[slopes[0]], [slopes[-1]]]), 1)
        vals = _kernels.conjugate_1d(x, f, grid.points[:, 0])
    else:
        x1, x2 = (np.asarray(a, dtype=float) for a in x)
        if f.shape != (x1.size, x2.size):
            raise ShapeError("f must have shape (len(x1), len(x2))")
        for arr, ax in ((f, x1), (f.T, x2)):
            for row in arr.T:
                if _convexity_defect_1d(ax, row) > tol:
                    raise ConvexityError("sampled function is not convex")
        gx = np.diff(f, axis=0)[:, :-1] / np.diff(x1)[:, None]
        gy = np.diff(f, axis=1)[:-1, :] / np.diff(x2)[None, :]
        grad = ConvexBody.hull(np.stack([gx.ravel(), gy.ravel()], 1), 2)
        p1, p2 = grid.axes
        inner = _kernels.conjugate(x2, f.T, p2)       # (n_p2, n_x1)
        vals = _kernels.conjugate(x1, -inner.T, p1).ravel()
    body = grad.intersect(P)
    mask = body.contains(grid.points, tol=1e-9) & grid.inside
    vals = np.where(mask, vals, np.inf)
    return DualPotential(P, body, vals, h)


def mass(u: DualPotential, return_flag: bool = False):
    """n! vol(Q); with ``return_flag`` also report whether Q has measure zero."""
    vol = u.body.volume
    zero = vol <= VOLUME_TOL
    m = 0.0 if zero else math.factorial(u.dim) * vol
    return (m, zero) if return_flag else m


def total_mass(P: Polytope) -> float:
    return math.factorial(P.dim) * P.volume


def energy_I(u: DualPotential) -> float:
    """-(mean of g over P); -inf when Q is a proper sub-body of P."""
    if not u.is_full:
        return -np.inf
    integral, covered = u.grid.integrate(u.values)
    return -integral / covered


def rooftop(u: DualPotential, v: DualPotential) -> DualPotential:
    """Largest potential below min(u, v): dual max(g_u, g_v) on Q_u cap Q_v (empty body if disjoint)."""
    _require_same(u, v)
    body = u.body.intersect(v.body)
    vals = np.maximum(u.values, v.values)
    if body.is_empty:
        vals = np.full_like(vals, np.inf)
    return DualPotential(u.polytope, body, vals, u.h)


def d1_distance(u: DualPotential, v: DualPotential) -> float:
    """I(u) + I(v) - 2 I(rooftop(u, v)) for full-mass potentials."""
    _require_same(u, v)
    if not (u.is_full and v.is_full):
        raise FiniteEnergyError("d1 needs potentials of full mass")
    return energy_I(u) + energy_I(v) - 2.0 * energy_I(rooftop(u, v))


def model_envelope(u: DualPotential) -> DualPotential:
    """Envelope of the singularity type: g replaced by 0 on the closed body."""
    vals = np.where(u.finite, 0.0, np.inf)
    return u.with_values(vals)


def i_envelope(u: DualPotential) -> DualPotential:
    """Envelope with respect to multiplier ideals; for toric potentials it equals ``model_envelope``."""
    return model_envelope(u)


@dataclass(frozen=True)
class MassGapReport:
    """Mixed masses m_j = n! MV(P[j], Q[n-j]) of u, v and max(u, v), and the gap."""
    m_u: tuple
    m_v: tuple
    m_max: tuple
    gap: float

    def to_json(self):
        return {"m_u": list(self.m_u), "m_v": list(self.m_v), "m_max": list(self.m_max), "gap": self.gap}


def mixed_masses(P: ConvexBody, Q: ConvexBody) -> tuple:
    """(m_0, ..., m_n) with m_j = n! MixedVol(P repeated j times, Q repeated n-j times)."""
    n = P.dim
    if n == 1:
        return (Q.volume if not Q.is_empty else 0.0, P.volume)
    if n == 2:
        if Q.is_empty:
            return (0.0, 0.0, 2.0 * P.volume)
        mixed = P.minkowski_sum(Q).volume - P.volume - Q.volume
        return (2.0 * Q.volume, mixed, 2.0 * P.volume)
    raise UnsupportedDimensionError(f"mixed masses need n <= 2, got {n}")


def mixed_mass_gap(u: DualPotential, v: DualPotential) -> MassGapReport:
    """sum_j (2 m_j(max(u, v)) - m_j(u) - m_j(v)); the body of max(u, v) is conv(Q_u cup Q_v)."""
    if u.dim > 2 or v.dim > 2:
        raise UnsupportedDimensionError("mixed_mass_gap supports n <= 2")
    _require_same(u, v)
    P = u.polytope
    top = u.body.join(v.body)
    mu, mv, mm = mixed_masses(P, u.body), mixed_masses(P, v.body), mixed_masses(P, top)
    gap = float(sum(2 * c - a - b for a, b, c in zip(mu, mv, mm)))
    return MassGapReport(mu, mv, mm, gap)
