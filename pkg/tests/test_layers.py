import numpy as np
import pytest

import vrsnet.nn.kernels as kernels
from vrsnet.nn import layers
from vrsnet.nn.layers import BatchNormLayer, ConvLayer


def identity_conv(channels, dtype=np.float32):
    w = np.zeros((channels, channels, 3, 3), dtype)
    for c in range(channels):
        w[c, c, 1, 1] = 1.0
    return ConvLayer(w, np.zeros(channels, dtype), 1)


class TestConvForward:
    def test_identity_kernel(self):
        rng = np.random.default_rng(0)
        x = rng.random((2, 3, 6, 7)).astype(np.float32)
        y = layers.conv3x3_grouped(x, identity_conv(3))
        assert np.array_equal(y, x)

    def test_constant_input_counting(self):
        # all-ones kernel on a constant-1 plane: zero padding makes corners 4,
        # non-corner edges 6, interior 9
        x = np.ones((1, 1, 5, 5), np.float32)
        conv = ConvLayer(np.ones((1, 1, 3, 3), np.float32), np.zeros(1, np.float32), 1)
        y = layers.conv3x3_grouped(x, conv)[0, 0]
        assert y[0, 0] == y[0, -1] == y[-1, 0] == y[-1, -1] == 4.0
        assert y[0, 2] == y[2, 0] == 6.0
        assert y[2, 2] == 9.0

    def test_group_independence(self):
        rng = np.random.default_rng(1)
        w = rng.normal(size=(4, 2, 3, 3)).astype(np.float32)
        conv = ConvLayer(w, np.zeros(4, np.float32), 2)
        x = rng.random((1, 4, 6, 6)).astype(np.float32)
        y0 = layers.conv3x3_grouped(x, conv)
        x2 = x.copy()
        x2[:, 2] += 1.0  # channel in group 1
        y2 = layers.conv3x3_grouped(x2, conv)
        assert np.array_equal(y0[:, :2], y2[:, :2])
        assert not np.array_equal(y0[:, 2:], y2[:, 2:])

    def test_channel_mismatch_rejected(self):
        with pytest.raises(ValueError):
            layers.conv3x3_grouped(np.zeros((1, 2, 4, 4), np.float32), identity_conv(3))

    def test_groups_must_divide(self):
        with pytest.raises(ValueError):
            ConvLayer(np.zeros((3, 2, 3, 3), np.float32), np.zeros(3, np.float32), 2)

    @pytest.mark.parametrize("dtype", [np.float32, np.float64])
    @pytest.mark.parametrize("groups", [1, 2, 4])
    def test_numba_matches_numpy(self, dtype, groups):
        rng = np.random.default_rng(2)
        x = rng.random((2, 4, 9, 11)).astype(dtype)
        w = rng.normal(size=(8, 4 // groups, 3, 3)).astype(dtype)
        b = rng.normal(size=8).astype(dtype)
        xp = layers.pad_input(x)
        got = kernels.conv3x3_fwd(xp, w, b, groups)
        ref = kernels._conv3x3_fwd_np(xp, w, b, np.empty_like(got), groups)
        assert np.allclose(got, ref, rtol=1e-5, atol=1e-6)


class TestConvBackward:
    def test_identity_kernel_weight_gradient(self):
        # loss = sum(output): center-tap gradient is the input sum, off-center
        # taps see the zero-padded shifted sums
        rng = np.random.default_rng(3)
        x = rng.random((1, 1, 4, 4)).astype(np.float64)
        conv = identity_conv(1, np.float64)
        y = layers.conv3x3_grouped(x, conv)
        gy = np.ones_like(y)
        _, dw, db = layers.conv3x3_grouped_backward(layers.pad_input(x), conv, gy)
        assert dw[0, 0, 1, 1] == pytest.approx(x.sum())
        assert dw[0, 0, 1, 0] == pytest.approx(x[0, 0, :, :-1].sum())
        assert dw[0, 0, 0, 1] == pytest.approx(x[0, 0, :-1, :].sum())
        assert db[0] == pytest.approx(16.0)

    def test_zero_loss_gradient_gives_zero_grads(self):
        rng = np.random.default_rng(4)
        x = rng.random((2, 4, 5, 5)).astype(np.float32)
        w = rng.normal(size=(4, 2, 3, 3)).astype(np.float32)
        conv = ConvLayer(w, np.zeros(4, np.float32), 2)
        y = layers.conv3x3_grouped(x, conv)
        dx, dw, db = layers.conv3x3_grouped_backward(layers.pad_input(x), conv,
                                                     np.zeros_like(y))
        assert not dx.any() and not dw.any() and not db.any()

    @pytest.mark.parametrize("groups", [1, 2])
    def test_finite_difference_all_parameters(self, groups):
        rng = np.random.default_rng(5)
        x = rng.random((2, 4, 5, 6))
        w = rng.normal(size=(4, 4 // groups, 3, 3))
        b = rng.normal(size=4)
        conv = ConvLayer(w, b, groups)
        coef = rng.normal(size=(2, 4, 5, 6))

        def loss():
            return float((layers.conv3x3_grouped(x, conv) * coef).sum())

        _, dw, db = layers.conv3x3_grouped_backward(layers.pad_input(x), conv, coef)
        step = 1e-3
        for arr, grad in ((w, dw), (b, db)):
            flat, gflat = arr.reshape(-1), grad.reshape(-1)
            for j in range(flat.size):
                orig = flat[j]
                flat[j] = orig + step
                lp = loss()
                flat[j] = orig - step
                lm = loss()
                flat[j] = orig
                fd = (lp - lm) / (2 * step)
                assert abs(gflat[j] - fd) / max(abs(fd), abs(gflat[j]), 1e-3) <= 1e-3

    def test_input_gradient_finite_difference(self):
        rng = np.random.default_rng(6)
        x = rng.random((1, 4, 4, 5))
        w = rng.normal(size=(4, 2, 3, 3))
        conv = ConvLayer(w, rng.normal(size=4), 2)
        coef = rng.normal(size=(1, 4, 4, 5))
        dx, _, _ = layers.conv3x3_grouped_backward(layers.pad_input(x), conv, coef)
        step = 1e-4
        flat = x.reshape(-1)
        dxf = dx.reshape(-1)
        for j in range(0, flat.size, 3):
            orig = flat[j]
            flat[j] = orig + step
            lp = float((layers.conv3x3_grouped(x, conv) * coef).sum())
            flat[j] = orig - step
            lm = float((layers.conv3x3_grouped(x, conv) * coef).sum())
            flat[j] = orig
            fd = (lp - lm) / (2 * step)
            assert abs(dxf[j] - fd) / max(abs(fd), abs(dxf[j]), 1e-3) <= 1e-3


class TestBatchNorm:
    def _layer(self, c=2, dtype=np.float32):
        return BatchNormLayer(np.ones(c, dtype), np.zeros(c, dtype),
                              np.zeros(c, dtype), np.ones(c, dtype))

    def test_constant_channel_maps_to_beta(self):
        layer = self._layer(1)
        layer.beta[:] = 0.3
        x = np.full((2, 1, 3, 3), 1.7, np.float32)
        y = layers.batchnorm(x, layer, mode="train")
        assert y == pytest.approx(0.3, abs=1e-6)

    def test_two_value_channel(self):
        # values {1, 3}: mean 2, population variance 1 -> +-1/sqrt(1+eps)
        layer = self._layer(1)
        x = np.array([1.0, 3.0], np.float32).reshape(2, 1, 1, 1)
        y = layers.batchnorm(x, layer, mode="train")
        expect = 1.0 / np.sqrt(1.0 + 1e-5)
        assert y[0, 0, 0, 0] == pytest.approx(-expect, abs=1e-6)
        assert y[1, 0, 0, 0] == pytest.approx(expect, abs=1e-6)

    def test_infer_identity_statistics(self):
        layer = self._layer(3)
        rng = np.random.default_rng(7)
        x = rng.random((2, 3, 4, 4)).astype(np.float32)
        y = layers.batchnorm(x, layer, mode="infer")
        assert np.allclose(y, x, atol=1e-4)

    def test_train_normalizes_per_channel(self):
        rng = np.random.default_rng(8)
        layer = self._layer(4)
        x = (rng.random((8, 4, 8, 8)) * 5 + 2).astype(np.float32)
        y = layers.batchnorm(x, layer, mode="train")
        for c in range(4):
            assert abs(y[:, c].mean()) < 1e-4
            assert abs(y[:, c].var() - 1.0) < 1e-3

    def test_running_stats_momentum_blend(self):
        layer = self._layer(1)
        layer.running_mean[:] = 1.0
        layer.running_var[:] = 4.0
        x = np.array([1.0, 3.0], np.float32).reshape(2, 1, 1, 1)
        layers.batchnorm(x, layer, mode="train")
        assert layer.running_mean[0] == pytest.approx(0.9 * 1.0 + 0.1 * 2.0)
        assert layer.running_var[0] == pytest.approx(0.9 * 4.0 + 0.1 * 1.0)

    def test_degenerate_population_rejected(self):
        layer = self._layer(1)
        with pytest.raises(ValueError):
            layers.batchnorm(np.zeros((1, 1, 1, 1), np.float32), layer, mode="train")

    def test_channel_mismatch(self):
        with pytest.raises(ValueError):
            layers.batchnorm(np.zeros((1, 3, 2, 2), np.float32), self._layer(2))

    def test_negative_running_var_rejected(self):
        with pytest.raises(ValueError):
            BatchNormLayer(np.ones(1), np.zeros(1), np.zeros(1), -np.ones(1))


class TestActivations:
    def test_relu_values(self):
        x = np.array([-2.5, 0.0, 1.25], np.float32)
        assert layers.activation(x, "relu").tolist() == [0.0, 0.0, 1.25]

    def test_sigmoid_center(self):
        assert layers.activation(np.zeros(1), "sigmoid")[0] == pytest.approx(0.5)

    def test_sigmoid_symmetry(self):
        rng = np.random.default_rng(9)
        x = rng.normal(scale=3, size=100)
        s = layers.sigmoid(x) + layers.sigmoid(-x)
        assert np.allclose(s, 1.0, atol=1e-12)

    def test_sigmoid_range(self):
        x = np.array([-30.0, 30.0])
        s = layers.sigmoid(x)
        assert 0 < s[0] < 1 and 0 < s[1] < 1

    def test_unknown_kind(self):
        with pytest.raises(ValueError):
            layers.activation(np.zeros(1), "tanh")


class TestMaxPool:
    def test_block_max(self):
        x = np.array([[0.1, 0.9], [0.3, 0.2]], np.float32).reshape(1, 1, 2, 2)
        y, idx = layers.maxpool(x, 2)
        assert y[0, 0, 0, 0] == pytest.approx(0.9)

    def test_factor_one_identity(self):
        x = np.random.default_rng(10).random((1, 2, 4, 4)).astype(np.float32)
        y, idx = layers.maxpool(x, 1)
        assert y is x and idx is None

    def test_chain_reduces_256_to_16(self):
        x = np.zeros((1, 1, 256, 256), np.float32)
        for f in (2, 2, 2, 2, 1):
            x, _ = layers.maxpool(x, f)
        assert x.shape == (1, 1, 16, 16)

    def test_nondivisible_rejected(self):
        with pytest.raises(ValueError):
            layers.maxpool(np.zeros((1, 1, 5, 5), np.float32), 2)

    def test_backward_routes_to_argmax_only(self):
        x = np.array([[1.0, 4.0], [2.0, 3.0]], np.float32).reshape(1, 1, 2, 2)
        y, idx = layers.maxpool(x, 2)
        gy = np.full_like(y, 5.0)
        dx = layers.maxpool_backward(gy, idx, x.shape, 2)
        assert dx[0, 0, 0, 1] == 5.0
        assert dx.sum() == 5.0

    def test_backward_conserves_gradient_mass(self):
        rng = np.random.default_rng(11)
        x = rng.random((2, 3, 8, 8)).astype(np.float32)
        y, idx = layers.maxpool(x, 4)
        gy = rng.random(y.shape).astype(np.float32)
        dx = layers.maxpool_backward(gy, idx, x.shape, 4)
        assert dx.sum() == pytest.approx(gy.sum(), rel=1e-6)

    @pytest.mark.parametrize("f", [2, 3, 4])
    def test_numba_matches_numpy(self, f):
        rng = np.random.default_rng(12)
        x = rng.random((2, 3, 12, 12)).astype(np.float32)
        got_y, got_i = kernels.pool_fwd(x, f)
        blocks = x.reshape(2, 3, 12 // f, f, 12 // f, f).transpose(0, 1, 2, 4, 3, 5)
        flat = np.ascontiguousarray(blocks).reshape(2, 3, 12 // f, 12 // f, f * f)
        assert np.array_equal(got_y, flat.max(axis=4))


class TestFusedBlock:
    """The fused bn+relu+pool path must equal the composed standalone ops."""

    @pytest.mark.parametrize("f", [1, 2, 4])
    def test_forward_equivalence(self, f):
        rng = np.random.default_rng(13)
        x = rng.normal(size=(3, 4, 8, 8)).astype(np.float32)
        gamma = rng.normal(size=4).astype(np.float32)
        beta = rng.normal(scale=0.2, size=4).astype(np.float32)
        mean, var = kernels.bn_stats(x)
        inv = 1.0 / np.sqrt(var + 1e-5)
        got, _ = kernels.bn_relu_pool_fwd(x, mean, inv, gamma, beta, f)
        ref = kernels.bn_affine(x, mean, inv, gamma, beta, relu=True)
        ref_pooled, _ = layers.maxpool(ref, f)
        assert np.allclose(got, ref_pooled, rtol=1e-5, atol=1e-6)

    @pytest.mark.parametrize("f", [1, 2])
    def test_backward_matches_numpy_path(self, f):
        rng = np.random.default_rng(14)
        x = rng.normal(size=(2, 3, 8, 8)).astype(np.float32)
        gamma = rng.normal(size=3).astype(np.float32)
        beta = rng.normal(scale=0.1, size=3).astype(np.float32)
        mean, var = kernels.bn_stats(x)
        inv = 1.0 / np.sqrt(var + 1e-5)
        out, idx = kernels.bn_relu_pool_fwd(x, mean, inv, gamma, beta, f)
        gyp = rng.normal(size=out.shape).astype(np.float32)
        dx1, dg1, db1 = kernels.bn_relu_pool_bwd(gyp, out, idx, x, mean, inv, gamma)
        dx2, dg2, db2 = kernels._bn_relu_pool_bwd_np(gyp, out, idx, x, mean, inv, gamma)
        assert np.allclose(dx1, dx2, rtol=1e-4, atol=1e-6)
        assert np.allclose(dg1, dg2, rtol=1e-5, atol=1e-7)
        assert np.allclose(db1, db2, rtol=1e-5, atol=1e-7)
