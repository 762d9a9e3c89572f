import numpy as np
import pytest

from rendition.lipschitz import (
    LipschitzEstimate,
    ProbeConfig,
    check_null_preservation,
    directional_derivative,
    estimate_lipschitz,
    radial_derivative,
)
from rendition.operators import BlackBoxOperator, build_operator

SMALL = ProbeConfig(n_samples=20, shape=(16, 16), seed=3)


class TestEstimate:
    @pytest.mark.parametrize("seed", [0, 1, 99])
    def test_identity_is_one(self, seed):
        est = estimate_lipschitz("identity", ProbeConfig(n_samples=10, shape=(8, 8), seed=seed))
        assert est.m_hat == 1.0

    def test_literal_steps_identity(self):
        est = estimate_lipschitz("identity", ProbeConfig(epsilon=1.0, n_samples=10, shape=(8, 8)))
        assert est.m_hat == 1.0

    def test_scaling(self):
        est = estimate_lipschitz(lambda x: 0.5 * x, SMALL)
        assert est.m_hat == pytest.approx(0.5, rel=1e-15)

    def test_activation_count(self):
        op = build_operator("gauss:size=3,sigma=1")
        estimate_lipschitz(op, SMALL)
        assert op.activations == 2 * SMALL.n_samples

    def test_determinism_and_metadata(self):
        a = estimate_lipschitz("median:h=3,w=3", SMALL)
        b = estimate_lipschitz("median:h=3,w=3", SMALL)
        assert a == b
        assert isinstance(a, LipschitzEstimate)
        assert a.n_samples == 20 and a.seed == 3 and a.shape == (16, 16)
        assert 0 <= a.argmax_ratio_seed_index < 20
        assert a.to_dict()["m_hat"] == a.m_hat

    def test_argmax_reproduces_max(self):
        op = build_operator("sigmoid:a=0.25")
        est = estimate_lipschitz(op, SMALL)
        rng = np.random.default_rng(SMALL.seed)
        for _ in range(est.argmax_ratio_seed_index + 1):
            x = rng.random(SMALL.shape)
            d = rng.random(SMALL.shape)
        xp = x + SMALL.epsilon * d
        ratio = np.linalg.norm(op(xp) - op(x)) / np.linalg.norm(xp - x)
        assert ratio == est.m_hat

    def test_workers_do_not_change_result(self):
        a = estimate_lipschitz("bilat:ss=1,sr=0.2", SMALL, max_workers=1)
        b = estimate_lipschitz("bilat:ss=1,sr=0.2", SMALL, max_workers=4)
        assert a == b

    @pytest.mark.parametrize("c", [-2.0, 0.3, 3.0])
    def test_homogeneity(self, c):
        base = build_operator("unsharp:base=[gauss:size=3,sigma=1],alpha=0.7")
        scaled = BlackBoxOperator(lambda x: c * base(x))
        a = estimate_lipschitz(base, SMALL).m_hat
        b = estimate_lipschitz(scaled, SMALL).m_hat
        assert b == pytest.approx(abs(c) * a, rel=1e-12)

    def test_config_validation(self):
        with pytest.raises(ValueError):
            ProbeConfig(epsilon=0)
        with pytest.raises(ValueError):
            ProbeConfig(n_samples=0)


class TestDerivatives:
    def test_linear_exact(self, rng):
        w = rng.normal(size=(12, 12))
        op = BlackBoxOperator(lambda x: (w @ x.ravel()).reshape(x.shape))
        x, d = rng.random((3, 4)), rng.random((3, 4))
        out = directional_derivative(op, x, d, 1e-3)
        assert np.allclose(out.ravel(), w @ d.ravel(), atol=1e-10)

    def test_identity(self, rng):
        x, d = rng.random((5, 5)), rng.random((5, 5))
        assert np.allclose(directional_derivative("identity", x, d, 1e-2), d, atol=1e-12)
        assert np.allclose(radial_derivative("identity", x, 1e-2), x, atol=1e-12)

    def test_square_analytic(self):
        x = np.full((4, 4), 0.5)
        d = np.ones((4, 4))
        out = directional_derivative(lambda v: v * v, x, d, 1e-4)
        # ((x + eps d)^2 - x^2) / eps = 2 x d + eps d^2
        assert np.allclose(out, 1.0 + 1e-4, atol=1e-10)

    def test_first_order_convergence(self):
        x = np.full((4, 4), 0.5)
        d = np.ones((4, 4))
        errs = [np.abs(directional_derivative(lambda v: v * v, x, d, e) - 1.0).max() for e in (1e-2, 5e-3, 2.5e-3)]
        assert errs[1] / errs[0] == pytest.approx(0.5, rel=1e-6)
        assert errs[2] / errs[1] == pytest.approx(0.5, rel=1e-6)

    def test_radial_is_directional_along_x(self, rng):
        op = build_operator("sigmoid:a=0.3")
        x = rng.random((6, 6))
        assert np.array_equal(radial_derivative(op, x, 1e-3), directional_derivative(op, x, x, 1e-3))

    def test_radial_linear(self, rng):
        w = rng.normal(size=(9, 9))
        op = BlackBoxOperator(lambda v: (w @ v.ravel()).reshape(v.shape))
        x = rng.random((3, 3))
        assert np.allclose(radial_derivative(op, x, 1e-2).ravel(), w @ x.ravel(), atol=1e-12)

    def test_two_activations(self, rng):
        op = build_operator("gauss:size=3,sigma=1")
        directional_derivative(op, rng.random((5, 5)), rng.random((5, 5)), 1e-2)
        assert op.activations == 2

    def test_errors(self):
        with pytest.raises(ValueError):
            directional_derivative("identity", np.zeros((2, 2)), np.zeros((3, 3)), 1e-2)
        with pytest.raises(ValueError):
            directional_derivative("identity", np.zeros((2, 2)), np.zeros((2, 2)), 0.0)


class TestNullPreservation:
    def test_examples(self):
        assert check_null_preservation("gauss:size=5,sigma=1", (16, 16)) == 0.0
        assert check_null_preservation("sigmoid:a=0.2", (16, 16)) <= 1e-15
        assert check_null_preservation(lambda x: x + 0.1, (8, 8)) == pytest.approx(0.1)
