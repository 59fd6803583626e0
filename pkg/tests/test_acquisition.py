import logging
import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from rcbo import gp
from rcbo.acquisition import AcquisitionConfig, expected_improvement, propose_next
from rcbo.hyperspace import default_space, from_unit, is_duplicate, to_unit

reals = st.floats(-50, 50)
sds = st.floats(0.0, 20.0)

MC_GRID = [(m, s) for m in (-1.0, -0.3, 0.0, 0.4, 1.5) for s in (0.05, 0.5, 1.0, 3.0)]


def mc_ei(mean, sd, f_best, n, rng):
    y = rng.normal(mean, sd, size=n)
    imp = np.maximum(f_best - y, 0.0)
    return imp.mean(), imp.std(ddof=1) / math.sqrt(n)


class TestExpectedImprovement:
    def test_zero_sd_at_incumbent(self):
        assert expected_improvement(1.0, 0.0, 1.0) == 0.0

    def test_zero_sd_is_plain_improvement(self):
        assert expected_improvement(0.7, 0.0, 1.0) == pytest.approx(0.3, abs=1e-15)
        assert expected_improvement(1.7, 0.0, 1.0) == 0.0
        assert expected_improvement(0.5, 0.0, 1.0, xi=0.2) == pytest.approx(0.3, abs=1e-15)

    def test_closed_form_at_incumbent(self):
        assert expected_improvement(0.0, 1.0, 0.0) == pytest.approx(1 / math.sqrt(2 * math.pi),
                                                                    rel=1e-15)

    def test_monte_carlo_oracle(self):
        rng = np.random.default_rng(2024)
        assert len(MC_GRID) == 20
        for mean, sd in MC_GRID:
            est, se = mc_ei(mean, sd, 0.0, 10 ** 6, rng)
            assert abs(expected_improvement(mean, sd, 0.0) - est) <= 3 * se + 1e-15, (mean, sd)

    def test_vectorised(self):
        m = np.array([0.0, 1.0, -1.0])
        s = np.array([1.0, 0.0, 2.0])
        v = expected_improvement(m, s, 0.5)
        assert v.shape == (3,)
        assert v[1] == 0.0
        assert v[0] == expected_improvement(0.0, 1.0, 0.5)

    def test_negative_sd_rejected(self):
        with pytest.raises(ValueError):
            expected_improvement(0.0, -1.0, 0.0)

    @given(reals, sds, reals, st.floats(0, 5))
    def test_non_negative(self, m, s, f, xi):
        assert expected_improvement(m, s, f, xi) >= 0.0

    @given(reals, reals, sds, reals)
    def test_nonincreasing_in_mean(self, m1, m2, s, f):
        lo, hi = min(m1, m2), max(m1, m2)
        a, b = expected_improvement(lo, s, f), expected_improvement(hi, s, f)
        assert b <= a + 1e-12 * max(1.0, abs(a))

    @given(st.floats(0, 50), sds, sds, reals)
    def test_nondecreasing_in_sd_above_incumbent(self, gap, s1, s2, f):
        m = f + gap
        lo, hi = min(s1, s2), max(s1, s2)
        a, b = expected_improvement(m, lo, f), expected_improvement(m, hi, f)
        assert b >= a - 1e-12 * max(1.0, abs(b))


def fitted_model(space, n=10, seed=0, fn=None):
    r = np.random.default_rng(seed)
    U = r.random((n, space.n_active))
    fn = fn or (lambda u: float(np.sum((u - 0.3) ** 2)))
    y = np.array([fn(u) for u in U])
    return gp.fit(U, y, rng=seed), [from_unit(space, u) for u in U]


class TestProposal:
    def test_deterministic(self):
        sp = default_space()
        m, hist = fitted_model(sp)
        a = propose_next(m, sp, hist, AcquisitionConfig(), 11)
        b = propose_next(m, sp, hist, AcquisitionConfig(), 11)
        assert a == b

    def test_one_deep_minimum_in_1d(self):
        sp = default_space().with_fixed(beta=0.01, gamma=0.01, rho=0.01)
        U = np.array([[0.0], [0.25], [0.5], [0.75], [1.0]])
        y = np.array([0.0, 0.0, -5.0, 0.0, 0.0])
        m = gp.fit(U, y, rng=0)
        hist = [from_unit(sp, u) for u in U]
        p = propose_next(m, sp, hist, AcquisitionConfig(), 0)
        assert not is_duplicate(sp, p, hist, 1e-6)
        # near the minimum or between probed points, never on them
        u = to_unit(sp, p)[0]
        assert 0.25 < u < 0.75

    def test_all_duplicates_falls_back_with_warning(self, caplog):
        sp = default_space()
        m, hist = fitted_model(sp)
        cfg = AcquisitionConfig(candidate_pool_size=64, duplicate_tol=2.0)
        with caplog.at_level(logging.WARNING):
            p = propose_next(m, sp, hist, cfg, 0)
        assert "duplicate" in caplog.text
        sp.check(p)

    @given(st.integers(0, 2 ** 32), st.integers(1, 4), st.integers(3, 12))
    def test_in_bounds_and_fresh(self, seed, d, n):
        names = ("alpha", "beta", "gamma", "rho")
        fixed = {k: v for k, v in zip(names[d:], (0.01, 0.01, 0.01))}
        sp = default_space().with_fixed(**fixed)
        m, hist = fitted_model(sp, n=n, seed=seed % 1000)
        cfg = AcquisitionConfig(candidate_pool_size=256, local_refinement_steps=12)
        p = propose_next(m, sp, hist, cfg, seed)
        sp.check(p)
        assert not is_duplicate(sp, p, hist, cfg.duplicate_tol)

    def test_config_validation(self):
        with pytest.raises(ValueError):
            AcquisitionConfig(candidate_pool_size=0)
        with pytest.raises(ValueError):
            AcquisitionConfig(exploration_jitter=-0.1)
