import os
import subprocess
import sys

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from toriclab import _kernels


def brute(s, F, y):
    out = np.full((y.size, F.shape[1]), -np.inf)
    for j, yj in enumerate(y):
        for i, si in enumerate(s):
            out[j] = np.maximum(out[j], si * yj - F[i])
    return out


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(1, 40), st.integers(1, 12), st.integers(1, 30))
def test_numpy_kernel_matches_loops(seed, ns, m, ny):
    rng = np.random.default_rng(seed)
    s, F, y = rng.standard_normal(ns), rng.standard_normal((ns, m)), rng.standard_normal(ny)
    F[rng.random((ns, m)) < 0.2] = np.inf
    assert np.array_equal(_kernels.conjugate_numpy(s, F, y), brute(s, F, y))


@pytest.mark.skipif(not _kernels.HAVE_NUMBA, reason="numba unavailable")
@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(1, 200), st.integers(1, 50), st.integers(1, 80))
def test_backends_agree_bitwise(seed, ns, m, ny):
    rng = np.random.default_rng(seed)
    s, F, y = rng.standard_normal(ns), rng.standard_normal((ns, m)), rng.standard_normal(ny)
    F[rng.random((ns, m)) < 0.2] = np.inf
    assert np.array_equal(_kernels.conjugate_numpy(s, F, y), _kernels.conjugate_numba(s, F, y))


def test_all_infinite_column_gives_minus_infinity():
    out = _kernels.conjugate(np.array([0.0, 1.0]), np.full((2, 1), np.inf), np.array([0.5]))
    assert out[0, 0] == -np.inf


def test_conjugate_1d():
    p = np.linspace(0, 1, 11)
    x = np.array([-1.0, 0.0, 2.0])
    assert np.allclose(_kernels.conjugate_1d(p, p ** 2, x), [np.max(p * v - p ** 2) for v in x])


def test_set_threads_accepts_any_count():
    _kernels.set_threads(1)
    _kernels.set_threads(10_000)


def _backend_in_subprocess(flag):
    env = dict(os.environ)
    env.pop("TORICLAB_DISABLE_NUMBA", None)
    if flag is not None:
        env["TORICLAB_DISABLE_NUMBA"] = flag
    out = subprocess.run([sys.executable, "-c", "from toriclab import _kernels; print(_kernels.backend())"],
                         env=env, capture_output=True, text=True, check=True)
    return out.stdout.strip()


def test_environment_flag_selects_numpy():
    assert _backend_in_subprocess("1") == "numpy"
    assert _backend_in_subprocess("0") == ("numba" if _kernels.HAVE_NUMBA else "numpy")


@pytest.mark.skipif(not _kernels.HAVE_NUMBA, reason="numba unavailable")
def test_backends_write_identical_tables(tmp_path):
    tables = []
    for flag in ("0", "1"):
        env = dict(os.environ, TORICLAB_DISABLE_NUMBA=flag)
        out = tmp_path / flag
        subprocess.run([sys.executable, "-m", "toriclab.cli", "run", "toric_ray_halfslope", "ray_energy_family",
                        "--out", str(out)], env=env, check=True, capture_output=True)
        tables.append([(out / n / "table.csv").read_bytes() for n in ("toric_ray_halfslope", "ray_energy_family")])
    assert tables[0] == tables[1]
