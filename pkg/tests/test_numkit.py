import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from deeprep.numkit import Gaussian, ParameterError, RngStream, ShapeError, Uniform, matmul, sample, transpose


def naive_matmul(a, b):
    out = [[0.0] * len(b[0]) for _ in a]
    for i in range(len(a)):
        for j in range(len(b[0])):
            for k in range(len(b)):
                out[i][j] += a[i][k] * b[k][j]
    return out


def test_identity_product():
    A = np.array([[1.5, -2.0], [0.25, 4.0]])
    np.testing.assert_array_equal(matmul(np.eye(2), A), A)


def test_matmul_matches_triple_loop():
    a = [[1, 2], [3, 4]]
    b = [[5, 6], [7, 8]]
    assert naive_matmul(a, b) == [[19, 22], [43, 50]]
    np.testing.assert_array_equal(matmul(a, b), naive_matmul(a, b))


def test_shape_error_names_both_shapes():
    with pytest.raises(ShapeError, match=r"2x3.*2x2"):
        matmul(np.ones((2, 3)), np.ones((2, 2)))


@given(st.integers(1, 5), st.integers(1, 5), st.integers(1, 5), st.integers(1, 5), st.integers(0, 2 ** 32 - 1))
def test_matmul_associative(m, n, p, q, seed):
    g = np.random.default_rng(seed)
    A, B, C = g.normal(size=(m, n)), g.normal(size=(n, p)), g.normal(size=(p, q))
    left = matmul(matmul(A, B), C)
    right = matmul(A, matmul(B, C))
    scale = np.abs(A) @ np.abs(B) @ np.abs(C)
    assert np.all(np.abs(left - right) <= 1e-9 * np.maximum(scale, 1e-300))


@given(st.integers(1, 6), st.integers(1, 6), st.integers(0, 1000))
def test_double_transpose_is_identity(r, c, seed):
    A = np.random.default_rng(seed).normal(size=(r, c))
    np.testing.assert_array_equal(transpose(transpose(A)), A)


def test_same_seed_same_samples():
    a = sample(RngStream(7), Gaussian(0, 1), 4, 3)
    b = sample(RngStream(7), Gaussian(0, 1), 4, 3)
    assert a.tobytes() == b.tobytes()


def test_derived_streams_are_keyed_not_ordered():
    root = RngStream(3)
    first = root.derive(2, 1).normal(5)
    root.derive(0).normal(100)
    again = RngStream(3).derive(2, 1).normal(5)
    np.testing.assert_array_equal(first, again)
    assert not np.array_equal(first, RngStream(3).derive(1, 2).normal(5))


def test_gaussian_mean_clt_bound():
    x = sample(RngStream(11), Gaussian(0, 1), 100_000, 1)
    # 3 sigma / sqrt(n) < 0.01, so +-0.02 is loose
    assert abs(x.mean()) < 0.02


def test_uniform_range():
    x = sample(RngStream(1), Uniform(0, 1), 1000, 10)
    assert x.min() >= 0 and x.max() < 1


@pytest.mark.parametrize("dist", [Gaussian(0, 0), Gaussian(0, -1), Uniform(1, 1), Uniform(2, 1)])
def test_bad_distribution_parameters(dist):
    with pytest.raises(ParameterError):
        sample(RngStream(0), dist, 2, 2)
