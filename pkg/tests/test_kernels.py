import os
import subprocess
import sys

import numpy as np
import pytest

from shipbow import _pykernels, kernels

needs_ext = pytest.mark.skipif("cython" not in kernels.BACKENDS, reason="compiled extension not built")


def test_get_backend():
    assert kernels.get_backend("python") is _pykernels
    assert kernels.get_backend() is kernels.BACKENDS[kernels.BACKEND]
    with pytest.raises(ValueError):
        kernels.get_backend("fortran")


def test_env_var_forces_fallback():
    code = "import shipbow.kernels as k; print(k.BACKEND)"
    env = dict(os.environ, SHIPBOW_PURE_PYTHON="1")
    out = subprocess.run([sys.executable, "-c", code], env=env, capture_output=True, text=True, check=True)
    assert out.stdout.strip() == "python"


@needs_ext
def test_window_sums_identical():
    c = kernels.BACKENDS["cython"]
    rng = np.random.default_rng(0)
    mag = rng.random((50, 70))
    cx = rng.integers(0, 70, 200)
    cy = rng.integers(0, 50, 200)
    for hw in (0, 1, 3, 10):
        assert np.array_equal(c.window_sums(mag, cx, cy, hw), _pykernels.window_sums(mag, cx, cy, hw))


@needs_ext
def test_greedy_identical():
    c = kernels.BACKENDS["cython"]
    rng = np.random.default_rng(1)
    for _ in range(300):
        n = int(rng.integers(0, 60))
        xs = rng.integers(0, 80, n) / 2.0
        ys = rng.integers(0, 80, n) / 2.0
        args = (float(rng.choice([2.5, 5, 15])), int(rng.integers(0, 4)), int(rng.integers(1, 20)))
        assert np.array_equal(c.greedy_select(xs, ys, *args), _pykernels.greedy_select(xs, ys, *args))


@needs_ext
@pytest.mark.parametrize("dense", [True, False])
def test_smo_identical(dense):
    from shipbow.svm import rbf_matrix

    c = kernels.BACKENDS["cython"]
    rng = np.random.default_rng(2)
    x = rng.normal(size=(120, 5))
    y = np.where(x[:, 0] + 0.5 * rng.normal(size=120) > 0, 1.0, -1.0)
    kmat = None
    if dense:
        kmat = rbf_matrix(x, x, 0.3)
        np.fill_diagonal(kmat, 1.0)
    a = c.smo_solve(kmat, x, y, 0.3, 4.0, 1e-3, 10**5, True)
    b = _pykernels.smo_solve(kmat, x, y, 0.3, 4.0, 1e-3, 10**5, True)
    assert np.array_equal(a[0], b[0])
    assert a[1:4] == b[1:4]
    assert np.array_equal(np.asarray(a[4]), np.asarray(b[4]))


@needs_ext
def test_transfer_identical():
    c = kernels.BACKENDS["cython"]
    rng = np.random.default_rng(3)
    x = rng.normal(size=(400, 6))
    w = rng.integers(1, 5, 400).astype(float)
    labels = rng.integers(0, 7, 400)
    la, ma = c.transfer_pass(x, w, labels, 7, 20)
    lb, mb = _pykernels.transfer_pass(x, w, labels, 7, 20)
    assert ma == mb > 0
    assert np.array_equal(la, lb)


def test_transfer_lowers_inertia():
    rng = np.random.default_rng(4)
    x = rng.normal(size=(200, 3))
    w = np.ones(200)
    labels = rng.integers(0, 4, 200)

    def inertia(lab):
        return sum(((x[lab == j] - x[lab == j].mean(0)) ** 2).sum() for j in range(4))

    new, moves = kernels.transfer_pass(x, w, labels, 4, 50)
    assert moves > 0 and inertia(new) < inertia(labels)
    again, more = kernels.transfer_pass(x, w, new, 4, 50)
    assert more == 0 and np.array_equal(again, new)
