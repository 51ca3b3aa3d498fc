import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from convnorm.errors import ShapeMismatch, SizeOverflow
from convnorm.norms import Kernel4D, l1_norm, linf_norm
from convnorm.oracle import (
    ZeroLipschitzNet,
    build_zero_lipschitz_net,
    conv_adjoint,
    conv_forward,
    dense_spectral_norm,
    materialize,
    matrix_frobenius,
    matrix_l1,
    matrix_linf,
    power_iteration_l2,
    power_iteration_matrix,
    size_cap,
)

from conftest import geometries, naive_conv, naive_matrix


def kern(values, hw, stride=1, padding=0):
    return Kernel4D.from_array(np.asarray(values, dtype=float), hw, stride, padding)


def test_materialize_scalar_is_scaled_identity():
    M = materialize(kern(np.full((1, 1, 1, 1), 2.0), 2))
    np.testing.assert_array_equal(M.matrix, 2 * np.eye(4))


def test_materialize_stride_one_row_pattern():
    # 3x3 kernel sliding over 5x5 without padding
    M = materialize(kern(np.ones((1, 1, 3, 3)), 5))
    assert (np.flatnonzero(M.matrix[0]) + 1).tolist() == [1, 2, 3, 6, 7, 8, 11, 12, 13]


def test_materialize_matches_direct_conv(rng):
    K = kern(rng.standard_normal((2, 3, 3, 3)), 7, stride=2, padding=1)
    M = materialize(K)
    assert M.rows == 2 * 4 * 4 and M.cols == 3 * 7 * 7
    for _ in range(20):
        x = rng.standard_normal((3, 7, 7))
        np.testing.assert_allclose(M.apply(x), naive_conv(K.data, x, (2, 2), (1, 1)).ravel(), rtol=1e-12, atol=1e-12)


def test_materialize_chunking_is_invisible(rng):
    K = kern(rng.standard_normal((2, 2, 2, 3)), (5, 6), stride=(1, 2), padding=(1, 0))
    np.testing.assert_array_equal(materialize(K, chunk=7).matrix, materialize(K).matrix)


def test_size_overflow(monkeypatch):
    K = kern(np.ones((1, 1, 3, 3)), 10)
    with pytest.raises(SizeOverflow):
        materialize(K, cap=64 * 100 - 1)
    monkeypatch.setenv("CONVNORM_SIZE_CAP", "1e3")
    assert size_cap() == 1000
    with pytest.raises(SizeOverflow):
        materialize(K)


def test_conv_forward_examples():
    K = kern(np.full((1, 1, 1, 1), 2.0), 2)
    np.testing.assert_array_equal(conv_forward(K, [[[1, 2], [3, 4]]]), [[[2, 4], [6, 8]]])
    assert not conv_forward(kern(np.ones((2, 1, 3, 3)), 4), np.zeros((1, 4, 4))).any()


def test_conv_forward_shape_mismatch():
    with pytest.raises(ShapeMismatch):
        conv_forward(kern(np.ones((1, 2, 3, 3)), 4), np.zeros((1, 4, 4)))
    with pytest.raises(ShapeMismatch):
        conv_adjoint(kern(np.ones((1, 2, 3, 3)), 4), np.zeros((1, 3, 3)))


def test_conv_forward_batched(rng):
    K = kern(rng.standard_normal((3, 2, 2, 2)), 5, stride=2, padding=1)
    x = rng.standard_normal((4, 2, 2, 5, 5))
    out = conv_forward(K, x)
    assert out.shape == (4, 2, 3, 3, 3)
    np.testing.assert_allclose(out[1, 0], conv_forward(K, x[1, 0]), rtol=1e-14)


def test_conv_matches_materialized_matrix(rng):
    K = kern(rng.standard_normal((2, 2, 3, 2)), (6, 5), stride=(2, 1), padding=(1, 2))
    M = materialize(K)
    x = rng.standard_normal((2, 6, 5))
    np.testing.assert_allclose(conv_forward(K, x).ravel(), M.apply(x), rtol=1e-12, atol=1e-13)


@settings(max_examples=100, deadline=None)
@given(geometries(assumption=False, max_input=7), st.integers(0, 2**32 - 1))
def test_forward_and_adjoint_properties(g, seed):
    rng = np.random.default_rng(seed)
    K = Kernel4D(g, rng.standard_normal(g.kernel_shape))
    x = rng.standard_normal(g.input_shape)
    x2 = rng.standard_normal(g.input_shape)
    y = rng.standard_normal(g.output_shape)
    fx = conv_forward(K, x)
    np.testing.assert_allclose(fx, naive_conv(K.data, x, (g.s1, g.s2), (g.p1, g.p2)), rtol=1e-12, atol=1e-12)
    # linearity
    np.testing.assert_allclose(conv_forward(K, 2.5 * x - x2), 2.5 * fx - conv_forward(K, x2), rtol=1e-10, atol=1e-10)
    # adjoint
    lhs = np.vdot(fx, y)
    rhs = np.vdot(x, conv_adjoint(K, y))
    assert lhs == pytest.approx(rhs, rel=1e-9, abs=1e-9)
    M = materialize(K).matrix
    np.testing.assert_allclose(conv_adjoint(K, y).ravel(), M.T @ y.ravel(), rtol=1e-10, atol=1e-12)


@settings(max_examples=100, deadline=None)
@given(geometries(max_input=7), st.integers(0, 2**32 - 1))
def test_central_cross_check(g, seed):
    K = Kernel4D(g, np.random.default_rng(seed).standard_normal(g.kernel_shape))
    M = materialize(K)
    np.testing.assert_array_equal(M.matrix, naive_matrix(K))
    assert l1_norm(K) == pytest.approx(matrix_l1(M), rel=1e-9)
    assert linf_norm(K) == pytest.approx(matrix_linf(M), rel=1e-9)
    assert matrix_l1(M) == matrix_linf(M.T)


def test_matrix_norms():
    assert (matrix_l1(2 * np.eye(4)), matrix_linf(2 * np.eye(4)), matrix_frobenius(2 * np.eye(4))) == (2, 2, 4)
    A = np.array([[1.0, -2.0], [3.0, -4.0]])
    assert (matrix_l1(A), matrix_linf(A)) == (6.0, 7.0)
    assert matrix_frobenius(A) == pytest.approx(np.sqrt(30), rel=1e-15)
    assert (matrix_l1(np.zeros((2, 3))), matrix_linf(np.zeros((2, 3))), matrix_frobenius(np.zeros((2, 3)))) == (0, 0, 0)


class TestPowerIteration:
    def test_zero_kernel(self):
        res = power_iteration_l2(kern(np.zeros((1, 1, 3, 3)), 5))
        assert res.sigma == 0.0 and res.converged

    def test_scaled_identity(self):
        res = power_iteration_l2(kern(np.full((1, 1, 1, 1), 2.0), 2))
        assert res.sigma == pytest.approx(2.0, abs=1e-9)

    def test_matches_svd(self, rng):
        K = kern(rng.standard_normal((2, 2, 3, 3)), 6)
        res = power_iteration_l2(K, tol=1e-10, max_iters=10_000, seed=3)
        assert res.converged
        assert res.sigma == pytest.approx(dense_spectral_norm(naive_matrix(K)), abs=1e-6)

    def test_deterministic(self, rng):
        K = kern(rng.standard_normal((2, 2, 3, 3)), 6, stride=2, padding=1)
        assert power_iteration_l2(K, seed=5) == power_iteration_l2(K, seed=5)

    def test_no_convergence_flag(self, rng):
        K = kern(rng.standard_normal((3, 3, 3, 3)), 8)
        res = power_iteration_l2(K, max_iters=2, tol=1e-300)
        assert not res.converged and res.n_iter == 2 and res.sigma > 0

    def test_matrix_variant(self, rng):
        A = rng.standard_normal((7, 5))
        assert power_iteration_matrix(A).sigma == pytest.approx(dense_spectral_norm(A), abs=1e-6)


class TestZeroLipschitz:
    def test_two_layer_example(self, rng):
        net = ZeroLipschitzNet(([1e6, 0.0], [0.0, 1e6]), pair=0)
        x = rng.standard_normal((100, 2)) * 10
        assert not net.forward(x).any()
        np.testing.assert_array_equal(net.layer_norms(), [1e6, 1e6])

    def test_magnitude_one(self, rng):
        net = build_zero_lipschitz_net([3, 3, 3], magnitude=1.0, seed=1)
        assert (net.layer_norms() >= 1.0).all()
        assert not net.forward(rng.standard_normal((50, 3))).any()

    @pytest.mark.parametrize("seed", range(10))
    def test_five_layers(self, seed):
        rng = np.random.default_rng(seed)
        net = build_zero_lipschitz_net([4] * 5, magnitude=10.0, seed=seed)
        d = net.diagonals
        assert not (d[net.pair] * d[net.pair + 1]).any()
        assert (net.layer_norms() >= 10.0).all()
        x1, x2 = rng.standard_normal((2, 200, 4)) * 100
        assert not net.forward(x1).any()
        assert net.empirical_lipschitz(x1, x2) == 0.0

    def test_rejects_overlapping_pair(self):
        with pytest.raises(ValueError):
            ZeroLipschitzNet(([1.0, 1.0], [0.0, 1.0]), pair=0)

    def test_rejects_bad_dims(self):
        with pytest.raises(ValueError):
            build_zero_lipschitz_net([3])
        with pytest.raises(ShapeMismatch):
            build_zero_lipschitz_net([3, 4])
        with pytest.raises(ValueError):
            build_zero_lipschitz_net([1, 1])
