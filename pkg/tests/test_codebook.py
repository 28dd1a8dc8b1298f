import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import two_means_optimum
from shipbow.codebook import Codebook, assign, encode_bow, kmeans_fit, nearest_center
from shipbow.errors import DimensionMismatch, EmptyDescriptorSet, TooFewDescriptors


def test_two_points_two_clusters(backend):
    cb = kmeans_fit([[0.0, 0.0], [10.0, 10.0]], 2)
    assert sorted(map(tuple, cb.centers)) == [(0.0, 0.0), (10.0, 10.0)]
    assert cb.inertia == 0.0


def test_1d_example(backend):
    cb = kmeans_fit([0.0, 1.0, 9.0, 10.0], 2)
    assert sorted(cb.centers[:, 0]) == [0.5, 9.5]
    assert cb.inertia == pytest.approx(two_means_optimum(np.array([[0.0], [1.0], [9.0], [10.0]])))


def test_too_few():
    with pytest.raises(TooFewDescriptors):
        kmeans_fit([[0.0], [1.0]], 3)
    with pytest.raises(TooFewDescriptors):
        kmeans_fit([[1.0], [1.0], [1.0]], 2)  # three descriptors, one distinct


def test_ragged_input_rejected():
    with pytest.raises((DimensionMismatch, ValueError)):
        kmeans_fit([[0.0, 1.0], [2.0]], 1)


def test_inertia_nonincreasing_and_centers_distinct(backend):
    rng = np.random.default_rng(7)
    for run in range(50):
        n, d, k = int(rng.integers(10, 80)), int(rng.integers(1, 6)), int(rng.integers(2, 7))
        x = rng.normal(size=(n, d)) + rng.integers(0, 3, (n, 1)) * 4
        cb = kmeans_fit(x, k, seed=run)
        h = cb.inertia_history
        assert all(b <= a for a, b in zip(h, h[1:])), h
        assert cb.inertia == h[-1]
        assert len({tuple(c) for c in cb.centers}) == k
        assert np.all(np.isfinite(cb.centers))
        _, dists = assign(x, cb.centers)
        assert cb.inertia == pytest.approx(dists.sum(), rel=1e-12)


def test_global_optimum_on_tiny_instances(backend):
    rng = np.random.default_rng(0)
    for t in range(20):
        n = int(rng.integers(2, 9))
        x = rng.normal(size=(n, int(rng.integers(1, 3))))
        cb = kmeans_fit(x, 2, seed=t)
        assert cb.inertia == pytest.approx(two_means_optimum(x), rel=1e-9, abs=1e-12)


def test_duplicates_weighted_like_repeats(backend):
    rng = np.random.default_rng(3)
    base = rng.normal(size=(30, 3))
    x = np.concatenate([base, base[:10], base[:10]])
    cb = kmeans_fit(x, 4, seed=1)
    _, d = assign(x, cb.centers)
    assert cb.inertia == pytest.approx(d.sum(), rel=1e-12)


def test_deterministic_and_backend_independent():
    from shipbow import _pykernels, kernels

    x = np.random.default_rng(5).normal(size=(300, 8))
    a = kmeans_fit(x, 6, seed=3)
    b = kmeans_fit(x.copy(), 6, seed=3)
    assert np.array_equal(a.centers, b.centers) and a.inertia_history == b.inertia_history
    saved = kernels.transfer_pass
    try:
        kernels.transfer_pass = _pykernels.transfer_pass
        c = kmeans_fit(x, 6, seed=3)
    finally:
        kernels.transfer_pass = saved
    assert np.array_equal(a.centers, c.centers)


def test_assign_matches_exact_scan():
    rng = np.random.default_rng(11)
    x = rng.normal(size=(500, 16))
    centers = rng.normal(size=(9, 16))
    labels, dists = assign(x, centers)
    exact = ((x[:, None, :] - centers[None]) ** 2).sum(-1)
    assert np.array_equal(labels, exact.argmin(1))
    assert np.allclose(dists, exact.min(1), rtol=1e-12)


def test_nearest_center():
    cb = Codebook(np.array([[0.0, 0.0], [1.0, 0.0], [3.0, 0.0], [5.0, 5.0]]))
    assert nearest_center(cb, [5.0, 5.0]) == 3
    assert nearest_center(cb, [2.0, 0.0]) == 1  # equidistant from 1 and 2
    rng = np.random.default_rng(0)
    for _ in range(100):
        d = rng.normal(size=2) * 3
        scan = min(range(4), key=lambda j: (float(((cb.centers[j] - d) ** 2).sum()), j))
        assert nearest_center(cb, d) == scan
    with pytest.raises(DimensionMismatch):
        nearest_center(cb, [1.0, 2.0, 3.0])


def test_encode_bow_examples():
    cb = Codebook(np.array([[0.0], [10.0]]))
    h = encode_bow(cb, [[1.0], [9.0], [10.0]])
    assert h.tolist() == [1 / 3, 2 / 3]
    assert encode_bow(Codebook(np.eye(3)), [[1.0, 0, 0]] * 4).tolist() == [1.0, 0.0, 0.0]
    with pytest.raises(EmptyDescriptorSet):
        encode_bow(cb, np.zeros((0, 1)))
    with pytest.raises(DimensionMismatch):
        encode_bow(cb, [[1.0, 2.0]])


@settings(max_examples=80, deadline=None)
@given(st.integers(1, 8), st.integers(1, 60), st.integers(0, 10**6))
def test_bow_is_a_distribution(k, n, seed):
    rng = np.random.default_rng(seed)
    cb = Codebook(rng.normal(size=(k, 4)))
    h = encode_bow(cb, rng.normal(size=(n, 4)))
    assert h.shape == (k,) and np.all(h >= 0)
    assert abs(h.sum() - 1.0) <= 1e-9
    assert np.allclose(h * n, np.round(h * n))
