"""Reference computations that share no code with the package.

Each oracle recomputes a quantity from its definition with a different
method (Cholesky instead of eigh, scipy.integrate.quad instead of panel
quadrature, exact rationals instead of floating half-spaces).
"""
from fractions import Fraction
from itertools import product

import numpy as np
from scipy import integrate, linalg
from scipy.spatial import ConvexHull


# ---------------------------------------------------------------- Hermitian metrics

def relative_log_eigs(U0, U1):
    """log of the eigenvalues of U1 relative to U0, via Cholesky whitening."""
    L = np.linalg.cholesky(U0)
    Linv = linalg.solve_triangular(L, np.eye(L.shape[0]), lower=True)
    M = Linv @ U1 @ Linv.conj().T
    return np.log(np.linalg.eigvalsh(0.5 * (M + M.conj().T)))


def d1v(U0, U1):
    return float(np.mean(np.abs(relative_log_eigs(U0, U1))))


def logdet_slope_by_chords(mats, s):
    """Slope of log det over the last half of the samples, by plain least squares."""
    ld = np.array([np.linalg.slogdet(m)[1] for m in mats])
    tail = s >= s[-1] / 2
    return float(np.polyfit(s[tail], ld[tail], 1)[0])


# ---------------------------------------------------------------- toric energies (n = 1)

def energy_by_mixed_quadrature(g, a=0.0, b=1.0, n_p=4001, x_lo=-40.0, x_hi=40.0, n_x=400001):
    """Monge-Ampere energy of the potential with dual g on [a, b], from x-space integrals.

    I(u) = (1/(2V)) (int u omega + int u omega_u) with u = phi - h_P the
    difference of the primal and the support function, omega the
    measure (b - a) delta_0 and omega_u = phi'' dx.
    """
    p = np.linspace(a, b, n_p)
    gp = g(p)
    x = np.linspace(x_lo, x_hi, n_x)
    # primal by brute force, in blocks
    phi = np.empty_like(x)
    for i in range(0, x.size, 5000):
        xs = x[i:i + 5000]
        phi[i:i + 5000] = np.max(np.outer(xs, p) - gp[None, :], axis=1)
    support = np.maximum(a * x, b * x)
    u = phi - support
    V = b - a
    u0 = float(np.interp(0.0, x, u))
    dphi = np.gradient(phi, x)
    # int u d(phi'), trapezoid on the derivative increments
    du = np.diff(dphi)
    um = 0.5 * (u[1:] + u[:-1])
    return float((u0 * V + np.sum(um * du)) / (2 * V))


def energy_by_riemann(g, a=0.0, b=1.0, n=200000):
    p = a + (np.arange(n) + 0.5) * (b - a) / n
    return float(-np.mean(g(p)))


# ---------------------------------------------------------------- Hilbert entries (n = 1)

def hilbert_entry(primal, alpha, k, a=0.0, b=1.0, breaks=()):
    """int exp(alpha x - k primal(x)) mu_0(dx) with scipy.integrate.quad on split intervals."""
    m = b - a

    def density(x):
        # m^2 sigma(mx)(1 - sigma(mx)), written in e^{-m|x|} to avoid 1 - 1 = 0 in the tails
        e = np.exp(-m * abs(x))
        return m * m * e / (1.0 + e) ** 2

    f = lambda x: np.exp(alpha * x - k * primal(x)) * density(x)  # noqa: E731
    pts = sorted(set([-200.0, 200.0, 0.0, *breaks]))
    total = 0.0
    for lo, hi in zip(pts[:-1], pts[1:]):
        total += integrate.quad(f, lo, hi, epsabs=0.0, epsrel=1e-13, limit=400)[0]
    return total


# ---------------------------------------------------------------- lattice counts

def count_points(k, box, inequalities):
    """#{alpha in Z^n within box : all inequalities hold}, using exact rationals.

    ``inequalities`` are callables alpha -> bool on Fractions.
    """
    ranges = [range(lo, hi + 1) for lo, hi in box]
    return sum(1 for alpha in product(*ranges) if all(f(tuple(Fraction(c) for c in alpha)) for f in inequalities))


def halfslope_jump_sum(k):
    """(1/V) sum of leave times for bodies [0, -tau] on [0, 1]: -(sum alpha/k)."""
    return -float(sum(Fraction(a, k) for a in range(k + 1)))


# ---------------------------------------------------------------- mixed volumes (n = 2)

def polygon_area(points):
    pts = np.asarray(points, dtype=float)
    if len(pts) < 3:
        return 0.0
    return float(ConvexHull(pts).volume)


def mixed_area(P, Q):
    """Mixed area MV(P, Q) by polarization of areas of Minkowski sums (scipy hulls)."""
    P, Q = np.asarray(P, float), np.asarray(Q, float)
    S = (P[:, None, :] + Q[None, :, :]).reshape(-1, 2)
    return 0.5 * (polygon_area(S) - polygon_area(P) - polygon_area(Q))


# ---------------------------------------------------------------- Legendre (n = 1)

def brute_hat(g_of_t, p, tau, t_max=200.0, n_t=200001):
    """sup_t (g_t(p) + t tau) on a fine t grid; +inf if still increasing at t_max."""
    t = np.linspace(0.0, t_max, n_t)
    vals = g_of_t(t, p) + t * tau
    i = int(np.argmax(vals))
    return np.inf if i == n_t - 1 and vals[-1] > vals[-2] + 1e-12 else float(vals[i])
