"""Finite-dimensional geometry of positive Hermitian inner products.

Distances, geodesics, exponents of one-parameter families, the induced
weight filtrations and the determinant-slope identity.
"""
from __future__ import annotations

import json
import warnings
from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np
from scipy import linalg

from .errors import (ConvergenceWarning, DataError, DefinitenessError, DomainError,
                     PositivityWarning, ShapeError, UnboundednessError)

HERMITIAN_RTOL = 1e-12
DEFINITE_RTOL = 1e-10
MAX_DIM = 512


def _equilibrator(a):
    """Diagonal scaling that turns diag(a) into ones; raises if a diagonal entry is not positive."""
    d = np.real(np.diag(a))
    if not np.all(np.isfinite(d)) or np.any(d <= 0):
        raise DefinitenessError("non-positive diagonal entry")
    return 1.0 / np.sqrt(d)


@dataclass(frozen=True, eq=False)
class HermitianMetric:
    """A positive definite Hermitian matrix in a fixed basis.

    Definiteness is tested on the diagonally equilibrated matrix D H D
    (D = diag(H)^-1/2): its smallest eigenvalue must exceed
    ``DEFINITE_RTOL`` times its largest.  The scaling makes the test
    insensitive to the huge dynamic ranges of Hilbert-type metrics.
    """
    entries: np.ndarray

    def __post_init__(self):
        a = np.array(self.entries, dtype=np.complex128)
        if a.ndim != 2 or a.shape[0] != a.shape[1] or a.shape[0] == 0:
            raise ShapeError(f"expected a non-empty square matrix, got shape {a.shape}")
        if a.shape[0] > MAX_DIM:
            raise ShapeError(f"dimension {a.shape[0]} exceeds the supported {MAX_DIM}")
        if not np.all(np.isfinite(a)):
            raise DefinitenessError("matrix has non-finite entries")
        scale = np.max(np.abs(a))
        if np.max(np.abs(a - a.conj().T)) > HERMITIAN_RTOL * scale:
            raise ShapeError("matrix is not Hermitian")
        a = 0.5 * (a + a.conj().T)
        d = _equilibrator(a)
        ev = np.linalg.eigvalsh(d[:, None] * a * d[None, :])
        if ev[0] <= DEFINITE_RTOL * ev[-1]:
            raise DefinitenessError(f"matrix is not positive definite (relative min eigenvalue {ev[0] / ev[-1]:.3e})")
        a.setflags(write=False)
        object.__setattr__(self, "entries", a)

    @property
    def dim(self) -> int:
        return self.entries.shape[0]

    def quad(self, v) -> float:
        """H(v, v) for a vector (or the rows of a 2-D array)."""
        v = np.asarray(v, dtype=np.complex128)
        return np.real(np.einsum("...i,ij,...j->...", v.conj(), self.entries, v))

    @classmethod
    def diagonal(cls, values):
        return cls(np.diag(np.asarray(values, dtype=np.complex128)))

    @classmethod
    def identity(cls, n):
        return cls(np.eye(n))

    def to_json(self) -> dict:
        e = self.entries
        return {"dim": self.dim, "entries": [[float(z.real), float(z.imag)] for z in e.ravel()]}

    @classmethod
    def from_json(cls, obj):
        n = int(obj["dim"])
        pairs = np.asarray(obj["entries"], dtype=float)
        if pairs.shape != (n * n, 2):
            raise ShapeError(f"expected {n * n} complex pairs, got shape {pairs.shape}")
        return cls((pairs[:, 0] + 1j * pairs[:, 1]).reshape(n, n))


def as_metric(u) -> HermitianMetric:
    return u if isinstance(u, HermitianMetric) else HermitianMetric(u)


def relative_spectrum(U0, U1):
    """Eigenvalues w and basis B with B^* U0 B = I and B^* U1 B = diag(w)."""
    U0, U1 = as_metric(U0), as_metric(U1)
    if U0.dim != U1.dim:
        raise ShapeError(f"dimension mismatch {U0.dim} vs {U1.dim}")
    d = _equilibrator(U0.entries)
    a0 = d[:, None] * U0.entries * d[None, :]
    a1 = d[:, None] * U1.entries * d[None, :]
    w, v = linalg.eigh(a1, a0)
    if np.any(w <= 0):
        raise DefinitenessError("relative eigenvalues are not positive")
    return w, d[:, None] * v


def d1v_distance(U0, U1) -> float:
    """(1/N) sum |log w_j| over the eigenvalues w_j of U1 relative to U0."""
    w, _ = relative_spectrum(U0, U1)
    return float(np.sum(np.abs(np.log(w))) / w.size)


def _from_basis(basis, diag_values):
    winv = np.linalg.inv(basis)
    m = winv.conj().T @ (diag_values[:, None] * winv)
    return 0.5 * (m + m.conj().T)


def geodesic_point(U0, U1, t: float, extrapolate: bool = False) -> HermitianMetric:
    """Point at time t on the geodesic from U0 (t=0) to U1 (t=1)."""
    U0, U1 = as_metric(U0), as_metric(U1)
    if not extrapolate and not 0.0 <= t <= 1.0:
        raise DomainError(f"t={t} outside [0, 1]; pass extrapolate=True to continue the geodesic")
    if t == 0:
        return U0
    if t == 1:
        return U1
    w, basis = relative_spectrum(U0, U1)
    return HermitianMetric(_from_basis(basis, np.exp(t * np.log(w))))


def dualize(U) -> HermitianMetric:
    """Induced inner product on the dual space: the inverse transpose."""
    a = U.entries if isinstance(U, HermitianMetric) else np.asarray(U, dtype=np.complex128)
    try:
        inv = np.linalg.inv(a)
    except np.linalg.LinAlgError as exc:
        raise DefinitenessError("singular matrix") from exc
    return HermitianMetric(inv.T)


def loewner_le(A, B, rtol: float = 1e-12) -> bool:
    """A <= B as quadratic forms (up to a relative tolerance)."""
    w, _ = relative_spectrum(B, A)
    return bool(w.max() <= 1.0 + rtol)


def sandwich_check(U1, U2, eps: Optional[float] = None, n_vectors: int = 64, rng=None) -> bool:
    """Check e^{-eps N} U2 <= U1 <= e^{eps N} U2 on random unit vectors.

    eps defaults to d1v_distance(U1, U2), the smallest value for which
    the bound is claimed.
    """
    U1, U2 = as_metric(U1), as_metric(U2)
    if eps is None:
        eps = d1v_distance(U1, U2)
    rng = np.random.default_rng(rng)
    n = U1.dim
    v = rng.standard_normal((n_vectors, n)) + 1j * rng.standard_normal((n_vectors, n))
    v /= np.linalg.norm(v, axis=1)[:, None]
    q1, q2 = U1.quad(v), U2.quad(v)
    bound = np.exp(eps * n)
    slack = 1e-12
    return bool(np.all(q1 <= bound * q2 * (1 + slack)) and np.all(q1 * (1 + slack) >= q2 / bound))


# --------------------------------------------------------------------------- families

@dataclass(frozen=True, eq=False)
class RayData:
    """Closed form of a geodesic ray: H_s = W^* diag(exp(s*lam)) W with W = basis^-1."""
    basis: np.ndarray
    lam: np.ndarray

    def at(self, s):
        return _from_basis(self.basis, np.exp(s * self.lam))


@dataclass(frozen=True, eq=False)
class MetricFamily:
    """A family s -> H_s sampled on an increasing grid starting at 0.

    ``kind`` is ``"sampled"`` or ``"generator"``; generator families keep
    the callable so they can be evaluated off-grid, and geodesic rays
    also carry their closed form in ``ray``.
    """
    s: np.ndarray
    mats: np.ndarray
    kind: str = "sampled"
    tail_window: Optional[tuple] = None
    generator: Optional[Callable] = None
    ray: Optional[RayData] = None

    def __post_init__(self):
        s = np.asarray(self.s, dtype=float)
        mats = np.asarray(self.mats, dtype=np.complex128)
        if s.ndim != 1 or s.size < 1:
            raise DataError("need at least one sample")
        if s[0] != 0:
            raise DataError("samples must start at s=0")
        if np.any(np.diff(s) <= 0):
            raise DataError("sample points must be strictly increasing")
        if mats.ndim != 3 or mats.shape[0] != s.size or mats.shape[1] != mats.shape[2]:
            raise ShapeError(f"expected {s.size} square matrices, got shape {mats.shape}")
        if self.kind not in ("sampled", "generator"):
            raise DomainError(f"unknown family kind {self.kind!r}")
        tw = self.tail_window
        if tw is None:
            tw = (0.5 * s[-1], s[-1])
        tw = (float(tw[0]), float(tw[1]))
        object.__setattr__(self, "s", s)
        object.__setattr__(self, "mats", mats)
        object.__setattr__(self, "tail_window", tw)

    @property
    def dim(self) -> int:
        return self.mats.shape[1]

    @property
    def s_max(self) -> float:
        return float(self.s[-1])

    def metric(self, i: int) -> HermitianMetric:
        return HermitianMetric(self.mats[i])

    def at(self, s: float) -> np.ndarray:
        """Matrix at parameter s: exact for generator families, nearest sample at or below s otherwise."""
        if self.ray is not None:
            return self.ray.at(s)
        if self.generator is not None:
            return np.asarray(self.generator(s), dtype=np.complex128)
        i = int(np.searchsorted(self.s, s, side="right")) - 1
        return self.mats[max(i, 0)]

    def tail_indices(self):
        lo, hi = self.tail_window
        return np.nonzero((self.s >= lo - 1e-12) & (self.s <= hi + 1e-12))[0]

    @classmethod
    def sampled(cls, s, mats, tail_window=None, validate=True):
        if validate:
            for m in mats:
                HermitianMetric(m)
        return cls(s=s, mats=mats, kind="sampled", tail_window=tail_window)

    @classmethod
    def from_generator(cls, fn, s_max=16.0, num=129, tail_window=None):
        s = np.linspace(0.0, s_max, num)
        mats = np.stack([HermitianMetric(fn(x)).entries for x in s])
        return cls(s=s, mats=mats, kind="generator", tail_window=tail_window, generator=fn)

    @classmethod
    def geodesic_ray(cls, H0, lam, basis=None, s_max=16.0, num=129, tail_window=None):
        """Ray H_s = W^* diag(e^{s lam}) W where the columns of ``basis`` are H0-orthonormal.

        With ``basis`` omitted the eigenvectors are the H0-orthonormalized
        standard basis (H0 must then be diagonal-friendly: any positive H0 works).
        """
        H0 = as_metric(H0)
        lam = np.asarray(lam, dtype=float)
        if basis is None:
            basis = np.linalg.inv(np.linalg.cholesky(H0.entries).conj().T)
        ray = RayData(np.asarray(basis, dtype=np.complex128), lam)
        s = np.linspace(0.0, s_max, num)
        mats = np.stack([ray.at(x) for x in s])
        return cls(s=s, mats=mats, kind="generator", tail_window=tail_window, generator=ray.at, ray=ray)

    @classmethod
    def through(cls, U0, U1, s_max=16.0, num=129, tail_window=None):
        """The geodesic ray leaving U0 and passing through U1 at s=1."""
        w, basis = relative_spectrum(U0, U1)
        return cls.geodesic_ray(U0, np.log(w), basis=basis, s_max=s_max, num=num, tail_window=tail_window)

    def to_json(self) -> dict:
        return {
            "kind": self.kind,
            "s": self.s.tolist(),
            "tail_window": list(self.tail_window),
            "samples": [HermitianMetric(m).to_json() for m in self.mats],
        }

    @classmethod
    def from_json(cls, obj):
        mats = np.stack([HermitianMetric.from_json(m).entries for m in obj["samples"]])
        tw = obj.get("tail_window")
        return cls(s=np.asarray(obj["s"], dtype=float), mats=mats, kind="sampled",
                   tail_window=tuple(tw) if tw else None)


@dataclass(frozen=True)
class WeightFiltration:
    """Jumping numbers and flag dimensions of an increasing filtration."""
    jumps: tuple
    dims: tuple
    bases: Optional[np.ndarray] = None

    def __post_init__(self):
        jumps = tuple(float(x) for x in self.jumps)
        dims = tuple(int(d) for d in self.dims)
        if len(jumps) != len(dims) or not jumps:
            raise ShapeError("jumps and dims must be non-empty and of equal length")
        if any(b <= a for a, b in zip(jumps, jumps[1:])):
            raise DomainError("jumps must be strictly increasing")
        if dims[0] <= 0 or any(b <= a for a, b in zip(dims, dims[1:])):
            raise DomainError("dims must be positive and strictly increasing")
        object.__setattr__(self, "jumps", jumps)
        object.__setattr__(self, "dims", dims)

    @property
    def dim(self) -> int:
        return self.dims[-1]

    def to_json(self) -> dict:
        return {"jumps": list(self.jumps), "dims": list(self.dims)}

    @classmethod
    def from_json(cls, obj):
        return cls(tuple(obj["jumps"]), tuple(obj["dims"]))


def stieltjes_integral(W: WeightFiltration) -> float:
    """sum_j lambda_j (d_j - d_{j-1}) with d_0 = 0."""
    prev = 0
    total = 0.0
    for lam, d in zip(W.jumps, W.dims):
        total += lam * (d - prev)
        prev = d
    return total


def _ls_slope(x, y):
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    xc = x - x.mean()
    return float(np.dot(xc, y - y.mean()) / np.dot(xc, xc))


def _tail_log_quad(F: MetricFamily, v):
    idx = F.tail_indices()
    if idx.size < 3:
        raise DataError(f"only {idx.size} samples in tail window {F.tail_window}; need 3")
    q = np.real(np.einsum("i,sij,j->s", v.conj(), F.mats[idx], v))
    with np.errstate(divide="ignore", invalid="ignore"):
        y = np.log(q)
    return F.s[idx], y


def _looks_unbounded(s, y) -> bool:
    """Slopes over the quarters of the tail keep increasing, by a margin (superlinear growth)."""
    if not np.all(np.isfinite(y)):
        return True
    if s.size < 8:
        return False
    parts = np.array_split(np.arange(s.size), 4)
    # neighbouring quarters share an endpoint so every slope uses at least two samples
    slopes = [_ls_slope(s[p[0]:p[-1] + 2], y[p[0]:p[-1] + 2]) for p in parts[:-1]]
    slopes.append(_ls_slope(s[parts[-1][0] - 1:], y[parts[-1][0] - 1:]))
    rising = all(b > a for a, b in zip(slopes[:-1], slopes[1:]))
    return rising and slopes[-1] - slopes[0] > 0.1 * max(1.0, abs(slopes[-1]))


def exponent(F: MetricFamily, v) -> float:
    """Growth rate of log H_s(v, v) / s.

    Geodesic rays return the exact value max{lam_j : v has a component
    along the j-th eigenvector}; other families use the least-squares
    slope of log H_s(v, v) over the tail window.
    """
    v = np.asarray(v, dtype=np.complex128).ravel()
    if v.size != F.dim:
        raise ShapeError(f"vector of length {v.size} for a family of dimension {F.dim}")
    norm = np.linalg.norm(v)
    if norm == 0:
        return -np.inf
    if F.ray is not None:
        c = np.linalg.solve(F.ray.basis, v)
        mask = np.abs(c) > 1e-12 * np.linalg.norm(c)
        return float(np.max(F.ray.lam[mask]))
    s, y = _tail_log_quad(F, v / norm)
    if _looks_unbounded(s, y):
        return np.inf
    return _ls_slope(s, y)


def _second_differences(s, f):
    """f(s_i) minus the chord through its neighbours, for interior samples."""
    s0, s1, s2 = s[:-2], s[1:-1], s[2:]
    w = (s1 - s0) / (s2 - s0)
    return f[1:-1] - ((1 - w) * f[:-2] + w * f[2:])


def _logdet(m):
    d = _equilibrator(m)
    sign, ld = np.linalg.slogdet(d[:, None] * m * d[None, :])
    if sign.real <= 0:
        raise DefinitenessError("non-positive determinant")
    return ld - 2.0 * np.sum(np.log(d))


def positivity_defect(F: MetricFamily, n_vectors: int = 4, seed: int = 0) -> float:
    """Largest violation of log-convexity of s -> H_s^*(w, w) over random w (0 if positive)."""
    rng = np.random.default_rng(seed)
    n = F.dim
    duals = np.stack([np.linalg.inv(m) for m in F.mats])
    worst = 0.0
    for _ in range(n_vectors):
        w = rng.standard_normal(n) + 1j * rng.standard_normal(n)
        q = np.log(np.real(np.einsum("i,sij,j->s", w.conj(), duals, w)))
        if q.size >= 3:
            dd = _second_differences(F.s, q)
            worst = max(worst, float(np.max(dd)) / (1.0 + np.max(np.abs(q))))
    return worst


def det_slope(F: MetricFamily, check_positivity: bool = True, tol: float = 1e-7) -> float:
    """Tail slope of s -> log det H_s (least squares over the tail window)."""
    idx = F.tail_indices()
    if idx.size < 3:
        raise DataError(f"only {idx.size} samples in tail window {F.tail_window}; need 3")
    if check_positivity:
        ld = np.array([_logdet(m) for m in F.mats])
        concave_defect = 0.0
        if ld.size >= 3:
            concave_defect = float(np.max(-_second_differences(F.s, ld))) / (1.0 + np.max(np.abs(ld)))
        if concave_defect > tol or positivity_defect(F) > tol:
            warnings.warn("family fails the positivity spot-check; the slope identity may not apply",
                          PositivityWarning, stacklevel=2)
        y = ld[idx]
    else:
        y = np.array([_logdet(F.mats[i]) for i in idx])
    return _ls_slope(F.s[idx], y)


def _chord_exponents(F: MetricFamily, basis, T):
    h0 = np.real(np.einsum("ij,ik,kj->j", basis.conj(), F.at(0.0), basis))
    hT = np.real(np.einsum("ij,ik,kj->j", basis.conj(), F.at(T), basis))
    return np.log(hT / h0) / T


def _sample_time(F: MetricFamily, T):
    if F.generator is not None:
        return float(T)
    i = int(np.searchsorted(F.s, T, side="right")) - 1
    if i <= 0:
        raise DataError(f"no sample in (0, {T}]")
    return float(F.s[i])


def asymptotic_ray(F: MetricFamily, horizon: Optional[float] = None, tol: float = 1e-2,
                   warn: bool = True) -> MetricFamily:
    """Geodesic ray asymptotic to F.

    The eigenbasis is that of the geodesic joining H_0 to H_T (T the
    horizon).  Along each basis vector the chord slopes at T and T/2 are
    combined by one Richardson step, which removes the O(1/T) bias of
    bounded perturbations.  A ConvergenceWarning is raised when the two
    chord slopes differ by more than ``tol``.
    """
    T = _sample_time(F, horizon if horizon is not None else F.s_max)
    Th = _sample_time(F, 0.5 * T)
    _, basis = relative_spectrum(F.at(0.0), F.at(T))
    lam_T = _chord_exponents(F, basis, T)
    lam_h = _chord_exponents(F, basis, Th)
    if not np.all(np.isfinite(lam_T)):
        raise UnboundednessError("exponent is not finite at the horizon")
    gap = float(np.max(np.abs(lam_T - lam_h)))
    if warn and gap > tol:
        warnings.warn(f"asymptotic ray not settled at horizon {T}: chord slopes move by {gap:.3e}",
                      ConvergenceWarning, stacklevel=2)
    lam = lam_T + (lam_T - lam_h) * Th / (T - Th)
    s = F.s[F.s <= T + 1e-12]
    if s.size < 3:
        s = np.linspace(0.0, T, 9)
    ray = RayData(basis, lam)
    mats = np.stack([ray.at(x) for x in s])
    return MetricFamily(s=s, mats=mats, kind="generator", generator=ray.at, ray=ray)


def filtration_of(F: MetricFamily, tol: Optional[float] = None, horizon: Optional[float] = None) -> WeightFiltration:
    """Jumping numbers and flag dimensions of {v : exponent(F, v) <= lam}.

    The flag is read off a basis adapted to the asymptotic ray; exponents
    of the basis vectors are then grouped when they agree to within
    ``tol`` (default 1e-6 times the exponent scale).
    """
    if F.ray is not None:
        basis = F.ray.basis
        lam = np.array(F.ray.lam, dtype=float)
    else:
        ray = asymptotic_ray(F, horizon=horizon, warn=False)
        basis = ray.ray.basis
        lam = np.array([exponent(F, basis[:, j]) for j in range(F.dim)])
    if not np.all(np.isfinite(lam)):
        raise UnboundednessError("family has an unbounded exponent")
    order = np.argsort(lam, kind="stable")
    lam = lam[order]
    basis = basis[:, order]
    if tol is None:
        tol = 1e-6 * max(1.0, float(np.max(np.abs(lam))))
    jumps, dims = [], []
    start = 0
    for j in range(1, lam.size + 1):
        if j == lam.size or lam[j] - lam[j - 1] > tol:
            jumps.append(float(np.mean(lam[start:j])))
            dims.append(j)
            start = j
    return WeightFiltration(tuple(jumps), tuple(dims), bases=basis)


def dumps_filtration(W: WeightFiltration) -> str:
    return json.dumps(W.to_json())


def random_positive_family(rng, n: int, s_max: float = 10.0, num: int = 81,
                           lam_range: Sequence[float] = (-1.0, 1.0)) -> tuple:
    """A positive, non-geodesic family H_s = A^* D_s A for benchmarks and tests.

    D_s is diagonal with entries 1 / int_0^1 exp(-s phi_j(x)) dx where
    phi_j is piecewise linear with minimum value lam_j on a plateau; the
    exponents of F are the lam_j.  Returns (family, lam).
    """
    lam = rng.uniform(*lam_range, size=n)
    plateau = rng.uniform(0.2, 0.6, size=n)
    rise = rng.uniform(2.0, 6.0, size=n)
    a = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
    a += 2.0 * np.sqrt(n) * np.eye(n)
    s = np.linspace(0.0, s_max, num)
    mats = np.empty((num, n, n), dtype=np.complex128)
    for i, x in enumerate(s):
        c = rise * (1 - plateau)
        # int_0^1 exp(-s phi) with phi = lam on [0, m], lam + rise (x - m) beyond
        tail = (1 - plateau) if x == 0 else -np.expm1(-x * c) / (x * rise)
        d = np.exp(x * lam) / (plateau + tail)
        m = a.conj().T @ (d[:, None] * a)
        mats[i] = 0.5 * (m + m.conj().T)
    return MetricFamily.sampled(s, mats, validate=False), lam
