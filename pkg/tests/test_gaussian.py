import math

import numpy as np
import pytest

from fbmlab import fbm
from fbmlab import gaussian as g

# floor of the local-nondeterminism ratio over the seeded H=0.3 family,
# pinned after measurement (observed ~0.207 across seeds; margin below)
LND_FLOOR_H03 = 0.18


def random_psd(rng, d, jitter=0.1):
    A = rng.normal(size=(d, d))
    return A @ A.T + jitter * np.eye(d)


class TestSpec:
    def test_rejects_asymmetric(self):
        with pytest.raises(ValueError):
            g.GaussianVectorSpec(np.array([[1.0, 0.5], [0.2, 1.0]]))

    def test_rejects_indefinite(self):
        with pytest.raises(ValueError):
            g.GaussianVectorSpec(np.array([[1.0, 2.0], [2.0, 1.0]]))

    def test_labels(self):
        spec = g.fbm_vector_spec(0.5, [0.5, 1.0])
        assert spec.labels == ("B(0.5)", "B(1)")
        assert spec.index_of("B(1)") == 1


class TestConditionalVariance:
    def test_independent_target_unchanged(self):
        cov = np.diag([2.0, 3.0, 4.0])
        spec = g.GaussianVectorSpec(cov)
        assert g.conditional_variance(spec, 0, [1, 2]) == pytest.approx(2.0)

    def test_linear_combination_vanishes(self):
        A = np.array([[1.0, 0.0], [0.0, 1.0], [1.0, 1.0]])
        cov = A @ np.diag([1.0, 2.0]) @ A.T  # X3 = X1 + X2 exactly
        spec = g.GaussianVectorSpec(cov)
        assert g.conditional_variance(spec, 2, [0, 1]) <= 1e-10 * cov[2, 2]

    def test_bivariate_textbook(self):
        cov = np.array([[1.0, 0.6], [0.6, 1.0]])
        spec = g.GaussianVectorSpec(cov)
        assert g.conditional_variance(spec, 0, [1]) == pytest.approx(0.64)

    def test_bivariate_regression_residual_oracle(self):
        rng = np.random.default_rng(0)
        cov = np.array([[2.0, 0.9], [0.9, 1.5]])
        L = np.linalg.cholesky(cov)
        x = rng.normal(size=(200000, 2)) @ L.T
        beta = np.linalg.lstsq(x[:, [1]], x[:, 0], rcond=None)[0]
        resid_var = np.var(x[:, 0] - x[:, [1]] @ beta)
        spec = g.GaussianVectorSpec(cov)
        assert g.conditional_variance(spec, 0, [1]) == pytest.approx(
            resid_var, rel=0.02)

    def test_monotone_in_conditioning_set(self):
        rng = np.random.default_rng(8)
        for _ in range(50):
            d = rng.integers(3, 7)
            spec = g.GaussianVectorSpec(random_psd(rng, d))
            prev = g.conditional_variance(spec, 0, [])
            for k in range(1, d):
                cur = g.conditional_variance(spec, 0, list(range(1, k + 1)))
                assert cur <= prev + 1e-12 * prev
                prev = cur

    def test_singular_block_warns(self):
        A = np.array([[1.0, 0.0], [1.0, 0.0], [0.0, 1.0]])
        cov = A @ A.T + 1e-14 * np.eye(3)  # given block (rows 0,1) singular
        spec = g.GaussianVectorSpec(cov)
        with pytest.warns(g.SingularConditioningWarning):
            val = g.conditional_variance(spec, 2, [0, 1])
        assert val >= 0.0


class TestFlipIdentity:
    def test_random_specs(self):
        rng = np.random.default_rng(17)
        for _ in range(500):
            spec = g.GaussianVectorSpec(random_psd(rng, 4))
            lhs, rhs = g.flip_variance_check(spec, A=2, B=3, N=[0, 1])
            assert lhs == pytest.approx(rhs, rel=1e-8)

    def test_no_conditioning_independent_pair(self):
        spec = g.GaussianVectorSpec(np.diag([2.0, 5.0]))
        lhs, rhs = g.flip_variance_check(spec, A=0, B=1, N=[])
        assert lhs == pytest.approx(5.0)
        assert rhs == pytest.approx(5.0)

    def test_fbm_times(self):
        spec = g.fbm_vector_spec(0.7, [0.3, 0.7, 1.0, 1.5])
        lhs, rhs = g.flip_variance_check(spec, A=2, B=3, N=[0, 1])
        assert lhs == pytest.approx(rhs, rel=1e-8)

    def test_degenerate_rejected(self):
        A = np.array([[1.0, 0.0], [0.0, 1.0], [1.0, 1.0]])
        cov = A @ np.diag([1.0, 2.0]) @ A.T
        spec = g.GaussianVectorSpec(cov)
        with pytest.raises(ValueError):
            g.flip_variance_check(spec, A=0, B=2, N=[1])


class TestLndRatio:
    def test_markov_case_exact(self):
        # Var[B_t | B_s] = t - s for Brownian motion when t > s
        assert g.lnd_ratio(0.5, 1.0, [0.4]) == pytest.approx(1.0, rel=1e-10)
        assert g.lnd_ratio(0.5, 2.0, [0.5]) == pytest.approx(1.0, rel=1e-10)

    def test_far_point_bounded(self):
        # variances stay below t^{2H}, so the ratio cannot blow up
        H = 0.3
        ratio = g.lnd_ratio(H, 50.0, [0.5, 1.0, 1.5])
        assert ratio <= 50.0 ** (2 * H) / (48.5 ** (2 * H))

    def test_coincident_point_rejected(self):
        with pytest.raises(ValueError):
            g.lnd_ratio(0.5, 1.0, [1.0, 2.0])

    def _sample_ratios(self, seed, count=200):
        rng = np.random.default_rng(seed)
        out = []
        for _ in range(count):
            m = rng.integers(1, 7)
            grid = np.sort(rng.uniform(0.05, 2.0, size=m))
            t = rng.uniform(0.05, 2.0)
            if min(abs(t - x) for x in grid) < 1e-3:
                continue
            if m > 1 and np.diff(grid).min() < 0.02:
                continue  # keep the conditioning block well conditioned
            out.append(g.lnd_ratio(0.3, t, grid))
        return np.array(out)

    def test_positive_floor_pinned_and_stable(self):
        r1 = self._sample_ratios(101)
        r2 = self._sample_ratios(202)
        assert r1.min() > 0 and r2.min() > 0
        assert r1.min() > LND_FLOOR_H03
        assert r2.min() > LND_FLOOR_H03


class TestIncrementDeterminantBound:
    @staticmethod
    def _det_and_bound(H, a, b, h):
        da = fbm.covariance(H, a + h, a + h) - 2 * fbm.covariance(H, a + h, a) \
            + fbm.covariance(H, a, a)
        db = fbm.covariance(H, b + h, b + h) - 2 * fbm.covariance(H, b + h, b) \
            + fbm.covariance(H, b, b)
        cross = (fbm.covariance(H, a + h, b + h) - fbm.covariance(H, a + h, b)
                 - fbm.covariance(H, a, b + h) + fbm.covariance(H, a, b))
        det = da * db - cross * cross
        if 0 < h < b - a:
            bound = a ** (2 * H) * (b - a - h) ** (2 * H)
        elif h > b - a:
            bound = a ** (2 * H) * min(h - (b - a), b - a) ** (2 * H)
        elif h < 0 and abs(h) < b - a:
            bound = (a - abs(h)) ** (2 * H) \
                * min(b - a - abs(h), abs(h)) ** (2 * H)
        else:
            bound = (a - abs(h)) ** (2 * H) \
                * min(abs(h) - (b - a), b - a) ** (2 * H)
        return det, bound

    @pytest.mark.parametrize("H", [0.3, 0.7])
    def test_fitted_delta_positive_per_branch(self, H):
        rng = np.random.default_rng(33)
        branches = {1: [], 2: [], 3: [], 4: []}
        while min(len(v) for v in branches.values()) < 500:
            a = rng.uniform(0.1, 2.0)
            b = a + rng.uniform(0.05, 2.0)
            h = rng.uniform(-(b - a) * 2, (b - a) * 2)
            if h == 0 or h <= -a:
                continue
            if 0 < h < b - a:
                case = 1
            elif h > b - a:
                case = 2
            elif h < 0 and abs(h) < b - a:
                case = 3
            elif h < 0 and abs(h) > b - a:
                case = 4
            else:
                continue
            if h < 0 and a - abs(h) <= 1e-6:
                continue
            det, bound = self._det_and_bound(H, a, b, h)
            if bound < 1e-12:
                continue
            branches[case].append(det / bound)
        for case, ratios in branches.items():
            delta = min(ratios)
            assert delta > 0, f"branch {case} has nonpositive fitted delta"


class TestPsdSqrt:
    def test_identity(self):
        assert np.allclose(g.psd_sqrt(np.eye(3)), np.eye(3))

    def test_diagonal(self):
        assert np.allclose(g.psd_sqrt(np.diag([4.0, 9.0])),
                           np.diag([2.0, 3.0]))

    def test_construct_then_recover(self):
        rng = np.random.default_rng(12)
        for _ in range(20):
            S0 = random_psd(rng, 4, jitter=0.5)
            S0 = g.psd_sqrt(S0 @ S0)  # make S0 itself the PSD square root
            M = S0 @ S0
            assert np.allclose(g.psd_sqrt(M), S0, rtol=1e-8, atol=1e-10)

    def test_square_reproduces(self):
        rng = np.random.default_rng(14)
        M = random_psd(rng, 5)
        S = g.psd_sqrt(M)
        assert np.linalg.norm(S @ S - M) <= 1e-10 * np.linalg.norm(M)
        assert np.allclose(S, S.T)

    def test_rejects_asymmetric(self):
        with pytest.raises(ValueError):
            g.psd_sqrt(np.array([[1.0, 1.0], [0.0, 1.0]]))

    def test_rejects_indefinite(self):
        with pytest.raises(ValueError):
            g.psd_sqrt(np.array([[1.0, 0.0], [0.0, -0.5]]))
