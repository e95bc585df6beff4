import numpy as np
import pytest

from vrsnet import network
from vrsnet.network import NetworkConfig, build_network, pooling_schedule
from vrsnet.nn.optim import OptimizerState
from vrsnet.training import adaptive_loss, train
from vrsnet.transforms import TransformSpec


class TestPoolingSchedule:
    def test_w16_eq1(self):
        assert pooling_schedule(16, "eq1") == (2, 2, 2, 2, 1)

    def test_w16_table3(self):
        assert pooling_schedule(16, "table3") == (1, 2, 2, 2, 2)

    def test_w1_identity(self):
        assert pooling_schedule(1, "eq1") == (1, 1, 1, 1, 1)
        assert pooling_schedule(1, "table3") == (1, 1, 1, 1, 1)

    @pytest.mark.parametrize("w", [1, 2, 4, 8, 16, 32])
    @pytest.mark.parametrize("source", ["eq1", "table3"])
    def test_product_equals_w(self, w, source):
        sched = pooling_schedule(w, source)
        assert len(sched) == 5
        assert int(np.prod(sched)) == w

    def test_unsupported_w(self):
        with pytest.raises(ValueError):
            pooling_schedule(3)

    def test_unknown_source(self):
        with pytest.raises(ValueError):
            pooling_schedule(16, "table9")


class TestBuildNetwork:
    def test_recommended_shapes(self):
        m = build_network(NetworkConfig())
        shapes = [(c.in_channels, c.out_channels, c.groups) for c in m.convs]
        assert shapes == [(4, 16, 1), (16, 16, 1), (16, 16, 4), (16, 16, 8),
                          (16, 4, 1)]
        assert len(m.bns) == 4

    def test_wide_input_only_changes_first_layer(self):
        m = build_network(NetworkConfig(in_channels=19))
        assert m.convs[0].in_channels == 19
        assert [(c.in_channels, c.out_channels) for c in m.convs[1:]] == \
            [(16, 16), (16, 16), (16, 16), (16, 4)]

    def test_group_schedule_is_table3(self):
        m = build_network(NetworkConfig())
        assert [c.groups for c in m.convs] == [1, 1, 4, 8, 1]

    def test_invalid_group_config_rejected(self):
        with pytest.raises(ValueError):
            NetworkConfig(latent_channels=6)  # 8 does not divide 6

    def test_bad_pooling_product_rejected(self):
        with pytest.raises(ValueError):
            NetworkConfig(w=16, pooling=(2, 2, 2, 1, 1))

    def test_init_scales(self):
        m = build_network(NetworkConfig(), seed=0)
        w = m.convs[1].weights
        assert abs(w.std() - np.sqrt(2.0 / (16 * 9))) < 0.01
        assert not m.convs[0].bias.any()
        for bn in m.bns:
            assert np.all(bn.gamma == 1) and not bn.beta.any()


class TestForward:
    def test_shape_256_to_16(self):
        m = build_network(NetworkConfig(), seed=1)
        x = np.random.default_rng(0).random((1, 4, 256, 256)).astype(np.float32)
        y = network.forward(m, x)
        assert y.shape == (1, 4, 16, 16)

    def test_single_tile(self):
        m = build_network(NetworkConfig(), seed=1)
        x = np.random.default_rng(0).random((1, 4, 16, 16)).astype(np.float32)
        assert network.forward(m, x).shape == (1, 4, 1, 1)

    def test_output_in_unit_interval(self):
        m = build_network(NetworkConfig(), seed=2)
        x = np.random.default_rng(1).random((2, 4, 32, 32)).astype(np.float32) * 10
        y = network.forward(m, x, mode="train")
        assert np.all(y > 0) and np.all(y < 1)

    def test_table3_source_also_reduces_by_w(self):
        m = build_network(NetworkConfig(schedule_source="table3"), seed=1)
        x = np.random.default_rng(0).random((1, 4, 64, 64)).astype(np.float32)
        assert network.forward(m, x).shape == (1, 4, 4, 4)

    def test_duplicated_batch_items_identical_in_infer(self):
        m = build_network(NetworkConfig(), seed=3)
        x = np.random.default_rng(2).random((1, 4, 32, 32)).astype(np.float32)
        xx = np.concatenate([x, x], axis=0)
        y = network.forward(m, xx, mode="infer")
        assert np.array_equal(y[0], y[1])

    def test_batch_composition_invariance_in_infer(self):
        m = build_network(NetworkConfig(), seed=4)
        rng = np.random.default_rng(3)
        xs = rng.random((3, 4, 32, 32)).astype(np.float32)
        alone = network.forward(m, xs[1:2], mode="infer")
        batched = network.forward(m, xs, mode="infer")
        assert np.array_equal(alone[0], batched[1])

    def test_indivisible_input_rejected(self):
        m = build_network(NetworkConfig())
        with pytest.raises(ValueError):
            network.forward(m, np.zeros((1, 4, 24, 24), np.float32))

    def test_all_zero_input_finite(self):
        m = build_network(NetworkConfig(), seed=5)
        y = network.forward(m, np.zeros((1, 4, 32, 32), np.float32))
        assert np.all(np.isfinite(y)) and np.all((y > 0) & (y < 1))


class TestBackwardOracle:
    """Central finite differences on the 64-bit mirror path."""

    @staticmethod
    def _gradcheck(model, x, seed, budget=None, step=1e-3):
        """Every checked parameter must match central differences at the given
        step within 1e-3 relative error, or (when the step interval straddles
        a ReLU/argmax kink, where central differences are not a valid
        derivative estimate) lie inside the one-sided difference envelope.
        Returns (failures, strict_fraction)."""
        rng = np.random.default_rng(seed)
        y, tape = network.forward(model, x, mode="train", want_tape=True)
        coef = rng.normal(size=y.shape)
        grads = network.backward(model, tape, coef)

        def loss():
            return float((network.forward(model, x, mode="train") * coef).sum())

        base = loss()
        failures = []
        strict = 0
        total = 0
        for name, p in model.parameters().items():
            flat = p.reshape(-1)
            gf = grads[name].reshape(-1)
            idx = range(flat.size) if budget is None else \
                rng.choice(flat.size, size=min(budget, flat.size), replace=False)
            for j in idx:
                orig = flat[j]
                flat[j] = orig + step
                lp = loss()
                flat[j] = orig - step
                lm = loss()
                flat[j] = orig
                fd = (lp - lm) / (2 * step)
                fd_p = (lp - base) / step
                fd_m = (base - lm) / step
                total += 1
                rel = abs(gf[j] - fd) / max(abs(gf[j]), abs(fd), 1e-3)
                if rel <= 1e-3:
                    strict += 1
                    continue
                scale = max(abs(fd_p), abs(fd_m), 1.0)
                lo = min(fd_p, fd_m) - 1e-3 * scale
                hi = max(fd_p, fd_m) + 1e-3 * scale
                if not (lo <= gf[j] <= hi):
                    failures.append((name, j, rel, (fd_m, gf[j], fd_p)))
        return failures, strict / total

    def test_two_layer_stack_all_params(self):
        cfg = NetworkConfig(w=4, in_channels=3, out_channels=2, latent_channels=8,
                            groups=(1, 2, 4, 2, 1))
        m = build_network(cfg, seed=3).astype(np.float64)
        x = np.random.default_rng(7).random((2, 3, 8, 8))
        failures, strict = self._gradcheck(m, x, seed=11)
        assert not failures, failures[:5]
        assert strict >= 0.85

    def test_full_network_sampled_params(self):
        m = build_network(NetworkConfig(), seed=5).astype(np.float64)
        x = np.random.default_rng(9).random((1, 4, 16, 16))
        failures, strict = self._gradcheck(m, x, seed=13, budget=40)
        assert not failures, failures[:5]
        assert strict >= 0.85

    def test_backward_requires_tape(self):
        m = build_network(NetworkConfig(), seed=0)
        with pytest.raises(ValueError):
            network.backward(m, None, np.zeros((1, 4, 1, 1), np.float32))


class TestAdaptiveLoss:
    def test_zero_at_exact_match(self):
        tf = TransformSpec(kind="identity")
        y = np.random.default_rng(0).random((2, 3))
        loss, grad = adaptive_loss(y, y.copy(), tf)
        assert loss == 0.0
        assert not grad.any()

    def test_single_value_case(self):
        tf = TransformSpec(kind="identity")
        loss, grad = adaptive_loss(np.array([0.7]), np.array([0.5]), tf)
        assert loss == pytest.approx(0.2)
        assert grad[0] == pytest.approx(-1.0)

    def test_brute_force_oracle(self):
        rng = np.random.default_rng(1)
        tf = TransformSpec(kind="clamped", mu=0.2)
        y = rng.random((4, 3, 2, 2))
        yh = rng.random((4, 3, 2, 2))
        loss, grad = adaptive_loss(y, yh, tf)
        acc = 0.0
        n = y.size
        for (yi, hi) in zip(y.reshape(-1), yh.reshape(-1)):
            ti = min(max(yi / (2 * 0.2), 0.0), 1.0)
            acc += abs(ti - hi)
        assert loss == pytest.approx(acc / n, abs=1e-6)
        assert np.allclose(grad, -np.sign(tf.apply(y) - yh) / n)

    def test_shape_mismatch(self):
        with pytest.raises(ValueError):
            adaptive_loss(np.zeros(3), np.zeros(4), TransformSpec(kind="identity"))


class TestTraining:
    def _toy_data(self, rng, n=16, res=32):
        x = rng.random((n, 4, res, res)).astype(np.float32)
        y = rng.uniform(0.2, 0.8, size=(n, 4, res // 16, res // 16)).astype(np.float32)
        return x, y

    def test_deterministic_same_seed(self):
        rng = np.random.default_rng(4)
        x, y = self._toy_data(rng)
        runs = []
        for _ in range(2):
            m = build_network(NetworkConfig(), seed=8)
            _, stats, _ = train(m, x, y, TransformSpec(kind="identity"),
                                OptimizerState(), epochs=3,
                                holdout=np.array([15]), seed=21)
            runs.append((tuple(stats.train_loss), tuple(stats.holdout_loss)))
        assert runs[0] == runs[1]

    def test_first_epoch_loss_near_half_offset(self):
        # sigmoid of near-zero logits starts around 0.5
        rng = np.random.default_rng(5)
        x, y = self._toy_data(rng, n=32)
        m = build_network(NetworkConfig(), seed=2)
        tf = TransformSpec(kind="identity")
        _, stats, _ = train(m, x, y, tf, OptimizerState(), epochs=1,
                            holdout=np.array([31]), seed=3)
        expect = np.abs(y[:31] - 0.5).mean()
        assert stats.train_loss[0] == pytest.approx(expect, abs=0.1)

    def test_constant_target_convergence(self):
        rng = np.random.default_rng(6)
        x, _ = self._toy_data(rng, n=32)
        y = np.full((32, 4, 2, 2), 0.3, np.float32)
        m = build_network(NetworkConfig(), seed=4)
        m2, stats, _ = train(m, x, y, TransformSpec(kind="identity"),
                             OptimizerState(), epochs=50,
                             holdout=np.arange(28, 32), seed=5)
        assert stats.holdout_loss[-1] < 0.01

    def test_overfit_small_set(self):
        # training loss decays to near zero on 16 samples; transient upticks
        # bounded at 5%
        rng = np.random.default_rng(7)
        x, y = self._toy_data(rng, n=17)
        m = build_network(NetworkConfig(), seed=6)
        _, stats, _ = train(m, x[:17], y, TransformSpec(kind="identity"),
                            OptimizerState(), epochs=400,
                            holdout=np.array([16]), seed=7)
        losses = np.array(stats.train_loss)
        assert losses[-1] < 0.02
        upticks = np.maximum(np.diff(losses), 0)
        assert np.all(upticks <= 0.05 * losses[:-1] + 1e-4)

    def test_running_mu_mode_updates(self):
        rng = np.random.default_rng(8)
        x, y = self._toy_data(rng)
        m = build_network(NetworkConfig(), seed=9)
        tf = TransformSpec(kind="clamped", mu=0.25, mu_mode="running",
                           ema_alpha=0.05)
        _, stats, tf_out = train(m, x, y, tf, OptimizerState(), epochs=3,
                                 holdout=np.array([15]), seed=10)
        assert tf_out.mu != 0.25
        assert len(set(stats.mu_trace)) > 1

    def test_empty_dataset_rejected(self):
        m = build_network(NetworkConfig())
        with pytest.raises(ValueError):
            train(m, np.zeros((0, 4, 32, 32), np.float32),
                  np.zeros((0, 4, 2, 2), np.float32),
                  TransformSpec(kind="identity"), OptimizerState(), epochs=1,
                  holdout=np.array([]), seed=0)
