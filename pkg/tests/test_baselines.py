import numpy as np
import pytest

from ll0.baselines import HIDDEN, Mlp, MlpSpec, mlp_eval, mlp_gradient_check, mlp_init, mlp_train_epoch
from ll0.datasets import EXPECTED_SIZES
from ll0.errors import ConfigError, DatasetError, InvalidDimensionError

MODELS = tuple(HIDDEN)


def toy(n=10, d=2, k=2, seed=0):
    rng = np.random.default_rng(seed)
    X = rng.uniform(0, 1, (n, d))
    labels = (X[:, 0] > 0.5).astype(int) % k
    return X, np.eye(k)[labels], labels


def expected_params(widths):
    return sum(a * b + b for a, b in zip(widths[:-1], widths[1:]))


class TestSpec:
    def test_spirals_counts(self):
        assert MlpSpec.named("fc0", 2, 2).parameter_count() == 6
        assert MlpSpec.named("fc10", 2, 2).parameter_count() == 52

    @pytest.mark.parametrize("dataset", sorted(EXPECTED_SIZES))
    @pytest.mark.parametrize("model", MODELS)
    def test_counting_formula(self, dataset, model):
        _, d, k = EXPECTED_SIZES[dataset]
        spec = MlpSpec.named(model, d, k)
        widths = (d, *HIDDEN[model], k)
        assert spec.parameter_count() == expected_params(widths)
        assert mlp_init(spec).parameter_count == spec.parameter_count()

    def test_unknown_model(self):
        with pytest.raises(ConfigError):
            MlpSpec.named("fc99", 2, 2)

    def test_bad_widths(self):
        with pytest.raises(ConfigError):
            MlpSpec(2, 2, (10, 0))


class TestInit:
    def test_same_seed_identical(self):
        a, b = mlp_init(MlpSpec(3, 2, (10, 10), 5)), mlp_init(MlpSpec(3, 2, (10, 10), 5))
        for Wa, Wb in zip(a.weights, b.weights):
            assert Wa.tobytes() == Wb.tobytes()

    def test_glorot_bounds_and_zero_bias(self):
        m = mlp_init(MlpSpec(64, 10, (10,), 1))
        for W, b in zip(m.weights, m.biases):
            lim = np.sqrt(6.0 / sum(W.shape))
            assert np.all(np.abs(W) <= lim) and np.abs(W).max() > 0.8 * lim
            assert not b.any()

    def test_seeds_differ(self):
        a, b = mlp_init(MlpSpec(3, 2, (10,), 0)), mlp_init(MlpSpec(3, 2, (10,), 1))
        assert not np.array_equal(a.weights[0], b.weights[0])


class TestTrain:
    def test_zero_lr_unchanged(self):
        X, Y, _ = toy()
        m = mlp_init(MlpSpec(2, 2, (10,), 0))
        before = m.copy()
        mlp_train_epoch(m, X, Y, lr=0.0)
        for W, W0 in zip(m.weights, before.weights):
            np.testing.assert_array_equal(W, W0)

    @pytest.mark.parametrize("model", MODELS)
    def test_gradient_check(self, model):
        X, Y, _ = toy(n=3, d=4, k=3, seed=2)
        m = mlp_init(MlpSpec.named(model, 4, 3, seed=3))
        for b in m.biases:
            b += np.random.default_rng(5).normal(0, 0.1, b.shape)
        assert mlp_gradient_check(m, X, Y) < 1e-4

    def test_gradient_check_near_relu_kink(self):
        X, Y, _ = toy(n=3, d=2, k=2, seed=7)
        m = mlp_init(MlpSpec(2, 2, (10,), 1))
        # park one hidden pre-activation 3e-6 above zero, inside the default step
        z = X @ m.weights[0] + m.biases[0]
        m.biases[0][0] += 3e-6 - z[0, 0]
        assert mlp_gradient_check(m, X, Y) < 1e-4
        # a plain central difference at the default step straddles the kink
        b, h = m.biases[0], 1e-5
        b[0] += h
        ep = m.loss(X, Y)
        b[0] -= 2 * h
        em = m.loss(X, Y)
        b[0] += h
        a = m.gradients(X, Y)[1][0][0]
        assert abs((ep - em) / (2 * h) - a) / abs(a) > 1e-2

    def test_gradient_check_flags_wrong_gradient(self, monkeypatch):
        X, Y, _ = toy(n=3, d=2, k=2, seed=7)
        m = mlp_init(MlpSpec(2, 2, (10,), 1))
        good = Mlp.gradients
        monkeypatch.setattr(Mlp, "gradients",
                            lambda self, X, Y: tuple([g * 1.01 for g in gs] for gs in good(self, X, Y)))
        assert mlp_gradient_check(m, X, Y) > 5e-3

    def test_loss_decreases(self):
        X, Y, _ = toy()
        m = mlp_init(MlpSpec(2, 2, (10,), 0))
        losses = [m.loss(X, Y)]
        for _ in range(5):
            mlp_train_epoch(m, X, Y, batch=10, lr=0.1)
            losses.append(m.loss(X, Y))
        assert all(b < a for a, b in zip(losses, losses[1:]))

    def test_short_last_batch(self):
        X, Y, _ = toy(n=13)
        m = mlp_init(MlpSpec(2, 2, (), 0))
        ref = m.copy()
        mlp_train_epoch(m, X, Y, batch=10, lr=0.1)
        for xb, yb in ((X[:10], Y[:10]), (X[10:], Y[10:])):
            gW, gb = ref.gradients(xb, yb)
            ref.weights[0] -= 0.1 * gW[0]
            ref.biases[0] -= 0.1 * gb[0]
        np.testing.assert_allclose(m.weights[0], ref.weights[0], atol=1e-15)

    def test_dimension_mismatch(self):
        X, Y, _ = toy()
        with pytest.raises(InvalidDimensionError):
            mlp_train_epoch(mlp_init(MlpSpec(3, 2)), X, Y)
        with pytest.raises(InvalidDimensionError):
            mlp_train_epoch(mlp_init(MlpSpec(2, 2)), X[:0], Y[:0])

    def test_deterministic_trace(self):
        def trace():
            X, Y, labels = toy(n=40)
            m = mlp_init(MlpSpec(2, 2, (10, 10), 7))
            out = []
            for _ in range(5):
                mlp_train_epoch(m, X, Y, lr=0.05)
                out.append(mlp_eval(m, X, labels))
            return out
        assert trace() == trace()


class TestEval:
    def test_untrained_fc0_near_chance(self):
        rng = np.random.default_rng(0)
        X = rng.uniform(0, 1, (400, 2))
        labels = np.repeat([0, 1], 200)
        acc = mlp_eval(mlp_init(MlpSpec(2, 2, (), 0)), X, labels)
        assert abs(acc - 0.5) <= 0.1

    def test_memorized_single_point(self):
        X, Y = np.array([[0.3, 0.9]]), np.array([[0.0, 1.0]])
        m = mlp_init(MlpSpec(2, 2, (10,), 0))
        for _ in range(50):
            mlp_train_epoch(m, X, Y, lr=0.1)
        assert mlp_eval(m, X, np.array([1])) == 1.0

    def test_empty_test_set(self):
        with pytest.raises(DatasetError):
            mlp_eval(mlp_init(MlpSpec(2, 2)), np.zeros((0, 2)), np.zeros(0, dtype=int))
