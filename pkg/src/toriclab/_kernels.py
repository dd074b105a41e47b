"""Hot loops shared by the transforms.

Every Legendre-type transform in the package reduces to a batched
max-plus product

    out[j, c] = max_i (s[i] * y[j] - F[i, c])

evaluated by brute force.  The numba version is used when numba imports
and ``TORICLAB_DISABLE_NUMBA`` is unset; the numpy version is always
available and is what the benchmark compares against.
"""
import os

import numpy as np

_DISABLED = os.environ.get("TORICLAB_DISABLE_NUMBA", "").strip().lower() in ("1", "true", "yes", "on")

try:
    if _DISABLED:
        raise ImportError
    import numba
    from numba import njit, prange
    # the bundled TBB is too old on some hosts; the workqueue layer is always present
    numba.config.THREADING_LAYER = "workqueue"
    HAVE_NUMBA = True
except ImportError:
    HAVE_NUMBA = False

# budget (in float64 elements) for the broadcast temporaries of the numpy path
_CHUNK_ELEMENTS = 1 << 22


def conjugate_numpy(s, F, y):
    """Batched discrete conjugate, pure numpy.

    :param s: abscissae, shape (ns,)
    :param F: values, shape (ns, m); +inf entries are ignored
    :param y: dual abscissae, shape (ny,)
    :return: array of shape (ny, m)
    """
    s = np.ascontiguousarray(s, dtype=np.float64)
    F = np.ascontiguousarray(F, dtype=np.float64)
    y = np.ascontiguousarray(y, dtype=np.float64)
    ns, m = F.shape
    out = np.empty((y.shape[0], m))
    step = max(1, _CHUNK_ELEMENTS // max(1, ns * m))
    for start in range(0, y.shape[0], step):
        yc = y[start:start + step]
        lin = s[:, None] * yc[None, :]
        out[start:start + step] = np.max(lin[:, :, None] - F[:, None, :], axis=0)
    return out


if HAVE_NUMBA:
    @njit(parallel=True, cache=True, nogil=True)
    def _conjugate_nb(s, F, y):
        ns, m = F.shape
        ny = y.shape[0]
        out = np.empty((ny, m))
        for j in prange(ny):
            for c in range(m):
                out[j, c] = -np.inf
            for i in range(ns):
                a = s[i] * y[j]
                for c in range(m):
                    v = a - F[i, c]
                    if v > out[j, c]:
                        out[j, c] = v
        return out

    def conjugate_numba(s, F, y):
        """Batched discrete conjugate, numba-compiled."""
        return _conjugate_nb(np.ascontiguousarray(s, dtype=np.float64),
                             np.ascontiguousarray(F, dtype=np.float64),
                             np.ascontiguousarray(y, dtype=np.float64))

    conjugate = conjugate_numba
else:
    conjugate_numba = None
    conjugate = conjugate_numpy


def backend():
    return "numba" if conjugate is conjugate_numba else "numpy"


def set_threads(n):
    """Set the worker count for the compiled kernels (no-op on the numpy path)."""
    if HAVE_NUMBA and n:
        numba.set_num_threads(max(1, min(int(n), numba.config.NUMBA_NUM_THREADS)))


def conjugate_1d(p, g, x):
    """sup_i (p_i * x_j - g_i) for a single function; returns shape (nx,)."""
    return conjugate(p, np.asarray(g, dtype=np.float64).reshape(-1, 1), np.atleast_1d(x))[:, 0]
