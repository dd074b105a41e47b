"""Convex bodies in dimension 1 and 2, and regular grids over them."""
from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from typing import Optional

import numpy as np
import shapely
from shapely.geometry import MultiPoint, Polygon
from shapely.geometry.polygon import orient

from .errors import DomainError, ShapeError, UnsupportedDimensionError

VOLUME_TOL = 1e-12


def parse_number(x) -> float:
    """Accept floats, ints and rational strings such as '1/3'."""
    if isinstance(x, str):
        return float(Fraction(x.strip()))
    return float(x)


@dataclass(frozen=True, eq=False)
class ConvexBody:
    """A compact convex set given by its vertices; may be degenerate or empty.

    Vertices are stored as an (m, n) array: [lo, hi] at n=1, the
    counter-clockwise hull at n=2 (two points for a segment, one for a
    point, none when empty).
    """
    vertices: np.ndarray
    dim: int

    @classmethod
    def empty(cls, dim: int):
        return cls(np.zeros((0, dim)), dim)

    @classmethod
    def hull(cls, points, dim: Optional[int] = None):
        pts = np.asarray(points, dtype=float)
        if dim is None:
            dim = pts.shape[-1] if pts.ndim == 2 else 1
        pts = pts.reshape(-1, dim)
        if dim not in (1, 2):
            raise UnsupportedDimensionError(f"dimension {dim} is not supported (only 1 and 2)")
        if pts.shape[0] == 0:
            return cls.empty(dim)
        if dim == 1:
            lo, hi = float(pts.min()), float(pts.max())
            return cls(np.array([[lo], [hi]]), 1)
        geom = MultiPoint([tuple(p) for p in pts]).convex_hull
        return cls._from_geom(geom)

    @classmethod
    def _from_geom(cls, geom):
        if geom.is_empty:
            return cls.empty(2)
        if geom.geom_type == "Polygon" and geom.area > 0:
            g = orient(geom, 1.0)
            xy = np.asarray(g.exterior.coords)[:-1]
            return cls(_drop_collinear(xy), 2)
        if geom.geom_type == "Point":
            return cls(np.array([[geom.x, geom.y]]), 2)
        xy = np.asarray(geom.convex_hull.coords if geom.geom_type != "Polygon" else geom.exterior.coords)
        if xy.shape[0] == 0:
            return cls.empty(2)
        # a segment: keep the two extreme points along its direction
        d = xy[-1] - xy[0]
        if np.linalg.norm(d) == 0:
            return cls(xy[:1], 2)
        t = xy @ d
        return cls(np.array([xy[np.argmin(t)], xy[np.argmax(t)]]), 2)

    @property
    def is_empty(self) -> bool:
        return self.vertices.shape[0] == 0

    @property
    def volume(self) -> float:
        v = self.vertices
        if self.is_empty:
            return 0.0
        if self.dim == 1:
            return float(v[1, 0] - v[0, 0])
        if v.shape[0] < 3:
            return 0.0
        x, y = v[:, 0], v[:, 1]
        return float(0.5 * (np.dot(x, np.roll(y, -1)) - np.dot(y, np.roll(x, -1))))

    @property
    def is_degenerate(self) -> bool:
        return self.volume <= VOLUME_TOL

    def halfspaces(self):
        """(A, b) with unit-normal rows such that the body is {p : A p <= b}."""
        v = self.vertices
        if self.is_empty:
            raise DomainError("empty body has no half-space description")
        if self.dim == 1:
            return np.array([[-1.0], [1.0]]), np.array([-v[0, 0], v[1, 0]])
        if v.shape[0] >= 3:
            e = np.roll(v, -1, axis=0) - v
            nrm = np.stack([e[:, 1], -e[:, 0]], axis=1)
            nrm /= np.linalg.norm(nrm, axis=1)[:, None]
            return nrm, np.einsum("ij,ij->i", nrm, v)
        if v.shape[0] == 2:
            d = (v[1] - v[0]) / np.linalg.norm(v[1] - v[0])
            perp = np.array([-d[1], d[0]])
            A = np.stack([-d, d, perp, -perp])
            return A, np.array([-d @ v[0], d @ v[1], perp @ v[0], -perp @ v[0]])
        A = np.array([[-1.0, 0.0], [1.0, 0.0], [0.0, -1.0], [0.0, 1.0]])
        p = v[0]
        return A, np.array([-p[0], p[0], -p[1], p[1]])

    def contains(self, points, tol: float = 1e-9) -> np.ndarray:
        pts = np.asarray(points, dtype=float).reshape(-1, self.dim)
        if self.is_empty:
            return np.zeros(pts.shape[0], dtype=bool)
        A, b = self.halfspaces()
        return np.all(pts @ A.T <= b + tol, axis=1)

    def to_shapely(self):
        v = self.vertices
        if self.is_empty:
            return Polygon()
        if v.shape[0] >= 3:
            return Polygon(v)
        if v.shape[0] == 2:
            return shapely.LineString(v)
        return shapely.Point(v[0])

    def intersect(self, other: "ConvexBody") -> "ConvexBody":
        _same_dim(self, other)
        if self.is_empty or other.is_empty:
            return ConvexBody.empty(self.dim)
        if self.dim == 1:
            lo = max(self.vertices[0, 0], other.vertices[0, 0])
            hi = min(self.vertices[1, 0], other.vertices[1, 0])
            if hi < lo - VOLUME_TOL:
                return ConvexBody.empty(1)
            return ConvexBody(np.array([[lo], [max(lo, hi)]]), 1)
        geom = self.to_shapely().intersection(other.to_shapely())
        return ConvexBody._from_geom(geom.convex_hull) if not geom.is_empty else ConvexBody.empty(2)

    def join(self, other: "ConvexBody") -> "ConvexBody":
        """Convex hull of the union."""
        _same_dim(self, other)
        return ConvexBody.hull(np.vstack([self.vertices, other.vertices]), self.dim)

    def minkowski_sum(self, other: "ConvexBody") -> "ConvexBody":
        _same_dim(self, other)
        if self.is_empty or other.is_empty:
            return ConvexBody.empty(self.dim)
        pts = (self.vertices[:, None, :] + other.vertices[None, :, :]).reshape(-1, self.dim)
        return ConvexBody.hull(pts, self.dim)

    def same_as(self, other: "ConvexBody", tol: float = 1e-9) -> bool:
        """Equality of the sets, compared through their vertices."""
        if self.dim != other.dim:
            return False
        if self.is_empty or other.is_empty:
            return self.is_empty and other.is_empty
        return bool(np.all(other.contains(self.vertices, tol)) and np.all(self.contains(other.vertices, tol)))

    def to_json(self):
        return self.vertices.tolist()


def _same_dim(a, b):
    if a.dim != b.dim:
        raise ShapeError(f"dimension mismatch {a.dim} vs {b.dim}")


def _drop_collinear(xy):
    keep = []
    m = xy.shape[0]
    for i in range(m):
        a, b, c = xy[i - 1], xy[i], xy[(i + 1) % m]
        cross = (b[0] - a[0]) * (c[1] - b[1]) - (b[1] - a[1]) * (c[0] - b[0])
        if abs(cross) > 1e-14 * max(1.0, np.abs(xy).max()) ** 2:
            keep.append(i)
    return xy[keep]


class Polytope(ConvexBody):
    """Full-dimensional convex polytope with rational vertices, n in {1, 2}."""

    def __init__(self, vertices, dim=None):
        pts = np.asarray([[parse_number(c) for c in np.atleast_1d(p)] for p in vertices], dtype=float)
        if dim is None:
            dim = pts.shape[1]
        if dim not in (1, 2):
            raise UnsupportedDimensionError(f"dimension {dim} is not supported (only 1 and 2)")
        body = ConvexBody.hull(pts, dim)
        if body.is_degenerate:
            raise DomainError("polytope vertices do not span a full-dimensional body")
        super().__init__(body.vertices, dim)

    @classmethod
    def interval(cls, a=0, b=1):
        return cls([[a], [b]])

    @classmethod
    def unit_square(cls):
        return cls([[0, 0], [1, 0], [1, 1], [0, 1]])

    @classmethod
    def simplex(cls, dim=2):
        if dim == 1:
            return cls.interval(0, 1)
        return cls([[0, 0], [1, 0], [0, 1]])

    @property
    def key(self):
        return (self.dim, tuple(np.round(self.vertices.ravel(), 15)))


def default_resolution(dim: int) -> float:
    return 1e-3 if dim == 1 else 1.0 / 256


@dataclass(frozen=True, eq=False)
class Grid:
    """Regular grid over the bounding box of a polytope.

    ``points`` lists all nodes (row-major in (i, j) at n=2); ``inside``
    marks nodes in the polytope.  At n=2 each cell is split along its
    anti-diagonal, which makes lattice simplices exact unions of cells.
    """
    axes: tuple
    shape: tuple
    steps: tuple
    points: np.ndarray
    inside: np.ndarray

    @property
    def dim(self):
        return len(self.axes)

    @property
    def size(self):
        return self.points.shape[0]

    @property
    def resolution(self):
        return max(self.steps)

    def interpolate(self, values, pts) -> np.ndarray:
        """Piecewise-linear interpolation of node values at arbitrary points (inf propagates)."""
        pts = np.asarray(pts, dtype=float).reshape(-1, self.dim)
        values = np.asarray(values, dtype=float)
        if self.dim == 1:
            x = self.axes[0]
            t = np.clip((pts[:, 0] - x[0]) / self.steps[0], 0, self.shape[0] - 1)
            i = np.minimum(np.floor(t).astype(int), self.shape[0] - 2)
            a = t - i
            return _lerp(values[i], values[i + 1], a)
        nx, ny = self.shape
        tx = np.clip((pts[:, 0] - self.axes[0][0]) / self.steps[0], 0, nx - 1)
        ty = np.clip((pts[:, 1] - self.axes[1][0]) / self.steps[1], 0, ny - 1)
        tx = np.where(np.abs(tx - np.round(tx)) < 1e-9, np.round(tx), tx)
        ty = np.where(np.abs(ty - np.round(ty)) < 1e-9, np.round(ty), ty)
        i = np.minimum(np.floor(tx).astype(int), nx - 2)
        j = np.minimum(np.floor(ty).astype(int), ny - 2)
        a, b = tx - i, ty - j
        f = values.reshape(self.shape)
        f00, f10, f01, f11 = f[i, j], f[i + 1, j], f[i, j + 1], f[i + 1, j + 1]
        # both halves agree on the shared diagonal; the slack keeps points on it off the outer node
        lower = a + b <= 1 + 1e-9
        # barycentric weights on the triangle holding each point; zero-weight corners are ignored
        w_corner = np.where(lower, np.clip(1 - a - b, 0, None), np.clip(a + b - 1, 0, None))
        f_corner = np.where(lower, f00, f11)
        w10 = np.where(lower, a, 1 - b)
        w01 = np.where(lower, b, 1 - a)
        out = np.zeros(pts.shape[0])
        for w, v in ((w_corner, f_corner), (w10, f10), (w01, f01)):
            used = w > 0
            with np.errstate(invalid="ignore"):
                out[used] += w[used] * v[used]
        return out

    def triangles(self):
        """Index triples of the triangulation (n=2) restricted to cells inside the polytope."""
        nx, ny = self.shape
        idx = np.arange(nx * ny).reshape(nx, ny)
        p00, p10 = idx[:-1, :-1].ravel(), idx[1:, :-1].ravel()
        p01, p11 = idx[:-1, 1:].ravel(), idx[1:, 1:].ravel()
        tri = np.concatenate([np.stack([p00, p10, p01], 1), np.stack([p10, p11, p01], 1)])
        return tri[np.all(self.inside[tri], axis=1)]

    def edges(self):
        """Index pairs of triangulation edges with both ends inside the polytope."""
        if self.dim == 1:
            i = np.arange(self.size - 1)
            e = np.stack([i, i + 1], 1)
        else:
            nx, ny = self.shape
            idx = np.arange(nx * ny).reshape(nx, ny)
            e = np.concatenate([
                np.stack([idx[:-1, :].ravel(), idx[1:, :].ravel()], 1),
                np.stack([idx[:, :-1].ravel(), idx[:, 1:].ravel()], 1),
                np.stack([idx[1:, :-1].ravel(), idx[:-1, 1:].ravel()], 1),
            ])
        return e[np.all(self.inside[e], axis=1)]

    def integrate(self, values) -> tuple:
        """Exact integral of the PL interpolant over covered cells, and the covered measure."""
        values = np.asarray(values, dtype=float)
        if self.dim == 1:
            ins = self.inside
            v = values
            seg = ins[:-1] & ins[1:]
            h = self.steps[0]
            return float(np.sum(0.5 * h * (v[:-1] + v[1:])[seg])), float(h * np.count_nonzero(seg))
        tri = self.triangles()
        area = 0.5 * self.steps[0] * self.steps[1]
        return float(area * np.sum(values[tri].mean(axis=1))), float(area * tri.shape[0])


def _lerp(a, b, t):
    with np.errstate(invalid="ignore"):
        out = a + t * (b - a)
    out = np.where(t == 0, a, out)
    return np.where(t == 1, b, out)


@lru_cache(maxsize=64)
def _grid_cached(key, h):
    dim, flat = key
    verts = np.asarray(flat, dtype=float).reshape(-1, dim)
    lo, hi = verts.min(axis=0), verts.max(axis=0)
    axes, steps = [], []
    for d in range(dim):
        n = max(1, int(round((hi[d] - lo[d]) / h)))
        axes.append(np.linspace(lo[d], hi[d], n + 1))
        steps.append((hi[d] - lo[d]) / n)
    if dim == 1:
        pts = axes[0][:, None]
    else:
        X, Y = np.meshgrid(axes[0], axes[1], indexing="ij")
        pts = np.stack([X.ravel(), Y.ravel()], 1)
    body = ConvexBody.hull(verts, dim)
    inside = body.contains(pts, tol=1e-9 * max(1.0, float(np.abs(verts).max())))
    for a in axes:
        a.setflags(write=False)
    pts.setflags(write=False)
    inside.setflags(write=False)
    return Grid(tuple(axes), tuple(len(a) for a in axes), tuple(steps), pts, inside)


def grid_for(P: Polytope, h: Optional[float] = None) -> Grid:
    if h is None:
        h = default_resolution(P.dim)
    return _grid_cached(P.key, float(h))


def sublevel_body(grid: Grid, level, c: float) -> ConvexBody:
    """{p : level(p) <= c} for a convex function given by its node values (PL interpolation)."""
    level = np.asarray(level, dtype=float)
    ok = grid.inside & (level <= c)
    if not np.any(ok):
        return ConvexBody.empty(grid.dim)
    e = grid.edges()
    a, b = level[e[:, 0]], level[e[:, 1]]
    cross = ((a <= c) & (b > c)) | ((b <= c) & (a > c))
    e, a, b = e[cross], a[cross], b[cross]
    with np.errstate(invalid="ignore", divide="ignore"):
        t = np.where(np.isfinite(b) & np.isfinite(a), (c - a) / (b - a), np.where(a <= c, 0.0, 1.0))
    pa, pb = grid.points[e[:, 0]], grid.points[e[:, 1]]
    pts = np.vstack([grid.points[ok], pa + t[:, None] * (pb - pa)])
    return ConvexBody.hull(pts, grid.dim)


def lattice_points(P: ConvexBody, k: int) -> np.ndarray:
    """All integer points of the dilate kP, sorted lexicographically; shape (m, n)."""
    if k < 1:
        raise DomainError("k must be a positive integer")
    v = P.vertices * k
    tol = 1e-9 * max(1.0, float(np.abs(v).max()))
    lo = np.ceil(v.min(axis=0) - tol).astype(int)
    hi = np.floor(v.max(axis=0) + tol).astype(int)
    if P.dim == 1:
        return np.arange(lo[0], hi[0] + 1)[:, None]
    X, Y = np.meshgrid(np.arange(lo[0], hi[0] + 1), np.arange(lo[1], hi[1] + 1), indexing="ij")
    pts = np.stack([X.ravel(), Y.ravel()], 1)
    A, b = P.halfspaces()
    keep = np.all(pts @ A.T <= k * b + tol, axis=1)
    return pts[keep]


def facet_flags(body: ConvexBody, P: ConvexBody, tol: float = 1e-9):
    """(A, b, on_boundary): half-spaces of body and whether each lies on a facet of P."""
    A, b = body.halfspaces()
    PA, Pb = P.halfspaces()
    same = (np.abs(A @ PA.T - 1.0) <= tol) & (np.abs(b[:, None] - Pb[None, :]) <= tol)
    return A, b, np.any(same, axis=1)
