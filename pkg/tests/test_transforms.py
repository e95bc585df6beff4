import numpy as np
import pytest

from vrsnet.transforms import (TransformSpec, t_clamped, t_clamped_inv,
                               t_logistic, t_logistic_inv, update_mu)


class TestClamped:
    def test_mu_maps_to_half(self):
        for mu in (0.05, 0.2, 0.5, 0.9):
            assert t_clamped(mu, mu) == pytest.approx(0.5)

    def test_clamp_boundaries(self):
        assert t_clamped(0.0, 0.3) == 0.0
        assert t_clamped(0.6, 0.3) == 1.0
        assert t_clamped(0.95, 0.3) == 1.0

    def test_forced_arithmetic(self):
        assert t_clamped(0.1, 0.2) == pytest.approx(0.25)

    def test_rejects_nonpositive_mu(self):
        with pytest.raises(ValueError):
            t_clamped(0.5, 0.0)

    def test_inverse_midpoint(self):
        assert t_clamped_inv(0.5, 0.2) == pytest.approx(0.2)

    def test_round_trip_on_unsaturated_region(self):
        rng = np.random.default_rng(3)
        mu = 0.3
        y = rng.uniform(0.0, 2 * mu, size=1000)
        back = t_clamped_inv(t_clamped(y, mu), mu)
        assert np.abs(back - y).max() < 1e-7

    def test_saturated_values_not_recovered(self):
        mu = 0.2
        y = 0.9  # above 2*mu
        assert t_clamped_inv(t_clamped(y, mu), mu) == pytest.approx(2 * mu)


class TestLogistic:
    def test_endpoints(self):
        assert t_logistic(0.0, 0.25, 10.0) == pytest.approx(0.0, abs=1e-12)
        assert t_logistic(1.0, 0.25, 10.0) == pytest.approx(1.0, abs=1e-12)

    def test_derived_value_at_mu(self):
        # direct high-precision evaluation of the normalized logistic:
        # (0.5 - S(0)) / (S(1) - S(0)) with mu=0.25, k=10
        assert t_logistic(0.25, 0.25, 10.0) == pytest.approx(0.4592, abs=1e-4)

    def test_strictly_monotone(self):
        rng = np.random.default_rng(11)
        a = rng.uniform(0, 1, size=500)
        b = a + rng.uniform(1e-6, 0.2, size=500)
        b = np.minimum(b, 1.0)
        keep = b > a
        assert np.all(t_logistic(b[keep], 0.25, 10.0) > t_logistic(a[keep], 0.25, 10.0))

    def test_inverse_endpoints(self):
        assert t_logistic_inv(0.0, 0.25, 10.0) == pytest.approx(0.0, abs=1e-9)
        assert t_logistic_inv(1.0, 0.25, 10.0) == pytest.approx(1.0, abs=1e-9)

    def test_round_trip(self):
        rng = np.random.default_rng(7)
        y = rng.uniform(0, 1, size=1000)
        back = t_logistic_inv(t_logistic(y, 0.25, 10.0), 0.25, 10.0)
        assert np.abs(back - y).max() <= 1e-6

    def test_inverse_of_derived_example(self):
        assert t_logistic_inv(0.4592, 0.25, 10.0) == pytest.approx(0.25, abs=1e-4)


class TestSpec:
    def test_identity_kind(self):
        spec = TransformSpec(kind="identity")
        y = np.array([0.1, 0.9])
        assert np.array_equal(spec.apply(y), y)
        assert np.array_equal(spec.invert(y), y)

    def test_apply_invert_agree_with_functions(self):
        y = np.linspace(0, 1, 11)
        spec = TransformSpec(kind="logistic", mu=0.3, k_logistic=10.0)
        assert np.allclose(spec.apply(y), t_logistic(y, 0.3, 10.0))
        spec = TransformSpec(kind="clamped", mu=0.3)
        assert np.allclose(spec.apply(y), t_clamped(y, 0.3))

    def test_validation(self):
        with pytest.raises(ValueError):
            TransformSpec(kind="banana")
        with pytest.raises(ValueError):
            TransformSpec(mu=0.0)
        with pytest.raises(ValueError):
            TransformSpec(k_logistic=-1)

    def test_both_transforms_map_unit_interval_into_itself(self):
        y = np.linspace(0, 1, 257)
        for kind in ("clamped", "logistic"):
            out = TransformSpec(kind=kind, mu=0.17).apply(y)
            assert out.min() >= 0.0 and out.max() <= 1.0
            assert np.all(np.diff(out) >= 0)


class TestRunningMu:
    def test_forced_arithmetic(self):
        spec = TransformSpec(mu=0.2, mu_mode="running", ema_alpha=0.01)
        out = update_mu(spec, np.full(8, 0.4))
        assert out.mu == pytest.approx(0.202)

    def test_fixed_point(self):
        spec = TransformSpec(mu=0.37, mu_mode="running", ema_alpha=0.05)
        assert update_mu(spec, np.full(4, 0.37)).mu == pytest.approx(0.37)

    def test_geometric_convergence(self):
        # closed form: mu_n = m + (mu_0 - m) (1-alpha)^n
        spec = TransformSpec(mu=0.1, mu_mode="running", ema_alpha=0.1)
        m = 0.6
        for _ in range(50):
            spec = update_mu(spec, np.full(3, m))
        expected = m + (0.1 - m) * 0.9 ** 50
        assert spec.mu == pytest.approx(expected, rel=1e-9)

    def test_requires_running_mode(self):
        with pytest.raises(ValueError):
            update_mu(TransformSpec(mu=0.2), np.array([0.1]))

    def test_rejects_empty_batch(self):
        spec = TransformSpec(mu=0.2, mu_mode="running")
        with pytest.raises(ValueError):
            update_mu(spec, np.array([]))
