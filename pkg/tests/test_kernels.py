import os
import subprocess
import sys

import numpy as np
import pytest

from nisqspec import kernels


@pytest.mark.parametrize("n", [1, 7, 300])
def test_gauss_pair_sum_backends_agree(n):
    rng = np.random.default_rng(n)
    a = rng.standard_normal(n) + 1j * rng.standard_normal(n)
    b = rng.standard_normal(n + 3) + 1j * rng.standard_normal(n + 3)
    args = (a.real.copy(), a.imag.copy(), b.real.copy(), b.imag.copy(), 0.7)
    ref = sum(np.exp(-0.7 * abs(x - y) ** 2) for x in a for y in b)
    assert kernels._nb_gauss_pair_sum(*args) == pytest.approx(ref, rel=1e-12)
    assert kernels._np_gauss_pair_sum(*args, block=5) == pytest.approx(ref, rel=1e-12)
    assert kernels.gauss_pair_sum(a, b, 0.7) == pytest.approx(ref, rel=1e-12)


@pytest.mark.parametrize("n", [2, 9, 400])
def test_nn_mean_distance_backends_agree(n):
    rng = np.random.default_rng(n)
    z = rng.standard_normal(n) + 1j * rng.standard_normal(n)
    a = kernels._nb_nn_mean_distance(z.real.copy(), z.imag.copy())
    b = kernels._np_nn_mean_distance(z.real.copy(), z.imag.copy())
    assert a == pytest.approx(b, rel=1e-14)
    assert kernels.nn_mean_distance(z) == pytest.approx(a, rel=1e-14)


def test_numpy_fallback_selected_by_environment():
    code = "import nisqspec; print(nisqspec.backend())"
    env = dict(os.environ, NISQSPEC_DISABLE_NUMBA="1")
    out = subprocess.run([sys.executable, "-c", code], env=env, capture_output=True, text=True, check=True)
    assert out.stdout.strip() == "numpy"
    env["NISQSPEC_DISABLE_NUMBA"] = "0"
    out = subprocess.run([sys.executable, "-c", code], env=env, capture_output=True, text=True, check=True)
    assert out.stdout.strip() == "numba"
