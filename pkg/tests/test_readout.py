import numpy as np
import pytest
from hypothesis import assume, given, strategies as st
from hypothesis.extra.numpy import arrays

from rcbo.readout import (ReadoutError, ReadoutWeights, SingularSystemError, TrainingConfig,
                          accuracy, classify_sequence, nmse, one_hot, ridge_train)


def full_weights(w: ReadoutWeights):
    return w.w if w.bias is None else np.vstack([w.w, w.bias])


def design(S, bias):
    return np.hstack([S, np.ones((S.shape[0], 1))]) if bias else S


def stationarity_residual(S, D, lam, bias):
    """Gradient of ||Sw - D||^2 + lam ||w||^2 vanishes: S^T (D - S w) = lam w."""
    X = design(S, bias)
    w = full_weights(ridge_train(S, D, TrainingConfig(lam, bias)))
    lhs = X.T @ (D - X @ w)
    return np.abs(lhs - lam * w).max() / max(np.abs(X.T @ D).max(), 1e-300)


class TestRidge:
    def test_orthogonal_unregularised(self, rng):
        Q, _ = np.linalg.qr(rng.normal(size=(6, 6)))
        D = rng.normal(size=(6, 2))
        w = ridge_train(Q, D, TrainingConfig(0.0, include_bias=False))
        np.testing.assert_allclose(w.w, Q.T @ D, atol=1e-12)

    def test_shrinkage_limit(self, rng):
        S, D = rng.random((30, 5)), rng.random((30, 2))
        w = ridge_train(S, D, TrainingConfig(1e12, include_bias=False))
        assert np.linalg.norm(w.w) <= 1e-9 * np.linalg.norm(S.T @ D)

    @pytest.mark.parametrize("bias", [False, True])
    def test_normal_equation_oracles(self, rng, bias):
        for _ in range(20):
            S, D = rng.normal(size=(40, 8)), rng.normal(size=(40, 2))
            X = design(S, bias)
            lam = 0.1
            w = full_weights(ridge_train(S, D, TrainingConfig(lam, bias)))
            # explicit inverse of the normal matrix
            o1 = np.linalg.inv(X.T @ X + lam * np.eye(X.shape[1])) @ X.T @ D
            # pseudo-inverse of the stacked least-squares system
            A = np.vstack([X, np.sqrt(lam) * np.eye(X.shape[1])])
            B = np.vstack([D, np.zeros((X.shape[1], 2))])
            o2 = np.linalg.pinv(A) @ B
            for o in (o1, o2):
                assert np.abs(w - o).max() <= 1e-10 * np.abs(o).max()

    def test_singular_without_regularisation(self):
        S = np.ones((10, 3))
        with pytest.raises(SingularSystemError, match="ridge_lambda > 0"):
            ridge_train(S, np.ones((10, 1)), TrainingConfig(0.0, include_bias=False))

    def test_bad_inputs(self):
        with pytest.raises(ReadoutError):
            ridge_train(np.ones((4, 2)), np.ones((5, 1)))
        with pytest.raises(ReadoutError):
            ridge_train(np.full((4, 2), np.nan), np.ones((4, 1)))
        with pytest.raises(ReadoutError):
            TrainingConfig(-1.0)

    @given(st.integers(1, 60), st.integers(1, 10), st.integers(1, 4),
           st.floats(1e-6, 1e3), st.booleans(), st.integers(0, 2 ** 32))
    def test_first_order_optimality(self, T, N, C, lam, bias, seed):
        r = np.random.default_rng(seed)
        S, D = r.normal(size=(T, N)), r.normal(size=(T, C))
        assert stationarity_residual(S, D, lam, bias) <= 1e-8

    def test_save_load(self, tmp_path, rng):
        w = ridge_train(rng.random((20, 4)), one_hot(rng.integers(0, 3, 20), 3))
        w.save(tmp_path / "w.txt")
        w2 = ReadoutWeights.load(tmp_path / "w.txt", include_bias=True)
        assert np.array_equal(w2.w, w.w) and np.array_equal(w2.bias, w.bias)


class TestNmse:
    def test_perfect(self):
        assert nmse([1, 2, 3], [1, 2, 3]) == 0.0

    def test_mean_predictor(self):
        d = np.array([1.0, 4.0, 2.0, 7.0])
        assert nmse(np.full(4, d.mean()), d) == pytest.approx(1.0, rel=1e-15)

    def test_constant_offset(self):
        d = np.array([-1.0, 1.0, -1.0, 1.0])   # population variance 1
        assert nmse(d + 0.1, d) == pytest.approx(0.01, rel=1e-12)

    def test_constant_target(self):
        with pytest.raises(ReadoutError):
            nmse([1, 2], [3, 3])

    @given(arrays(float, 12, elements=st.floats(-100, 100)),
           arrays(float, 12, elements=st.floats(-100, 100)),
           st.floats(0.01, 100.0), st.booleans(), st.floats(-100, 100))
    def test_affine_invariance(self, y, d, a, neg, b):
        assume(np.var(d) > 1e-3)
        a = -a if neg else a
        assert nmse(a * y + b, a * d + b) == pytest.approx(nmse(y, d), rel=1e-7, abs=1e-12)


class TestClassification:
    def test_unanimous(self):
        Y = np.tile([0.1, 0.2, 0.9, 0.3], (5, 1))
        assert classify_sequence(Y) == 2

    def test_majority(self):
        Y = np.array([[1.0, 0.0], [0.0, 1.0], [0.2, 0.8]])
        assert classify_sequence(Y) == 1

    def test_tie_goes_to_lowest_class(self):
        Y = np.array([[0.0, 1.0, 0.0], [1.0, 0.0, 0.0]])
        assert classify_sequence(Y) == 0
        assert classify_sequence([[0.5, 0.5, 0.1]]) == 0

    @given(arrays(float, (7, 4), elements=st.floats(-10, 10)), st.floats(1e-3, 1e3))
    def test_positive_rescaling_invariance(self, Y, c):
        assert classify_sequence(c * Y) == classify_sequence(Y)

    def test_accuracy_examples(self):
        assert accuracy([1, 2, 3], [1, 2, 3]) == 1.0
        assert accuracy([1, 2], [0, 0]) == 0.0
        assert accuracy([0, 1, 2, 3], [0, 1, 2, 0]) == 0.75

    def test_accuracy_length_mismatch(self):
        with pytest.raises(ReadoutError):
            accuracy([1, 2], [1])

    @given(st.lists(st.tuples(st.integers(0, 5), st.integers(0, 5)), min_size=1, max_size=50))
    def test_accuracy_is_one_minus_hamming(self, pairs):
        p, t = zip(*pairs)
        a = accuracy(p, t)
        hamming = sum(x != y for x, y in pairs) / len(pairs)
        assert 0.0 <= a <= 1.0
        assert a == pytest.approx(1.0 - hamming, abs=1e-15)
