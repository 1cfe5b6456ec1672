import math

import mpmath
import numpy as np
import pytest

from eood import (
    SampleMatrix,
    conditional_entropy,
    digamma,
    joint_entropy,
    knn_entropy,
    seeded_rng,
)
from eood.errors import AlignmentError, DomainError, InsufficientSamplesError

GAUSS_1D = 0.5 * math.log(2 * math.pi * math.e)  # 1.4189385332046727


class TestDigamma:
    def test_frozen_reference_points(self):
        # psi(1) = -euler_mascheroni, psi(2) = 1 - euler_mascheroni
        assert digamma(1.0) == pytest.approx(-0.5772156649015329, abs=1e-10)
        assert digamma(2.0) == pytest.approx(0.4227843350984671, abs=1e-10)

    def test_accuracy_against_mpmath(self):
        mpmath.mp.dps = 30
        xs = [1e-4, 0.1, 0.5, 1.0, 1.5, 3.0, 7.99, 9.999, 10.0, 123.4, 1e6]
        for x in xs:
            assert abs(digamma(x) - float(mpmath.digamma(x))) <= 1e-10
        # near the pole |psi| ~ 1/x dwarfs any absolute bound float64 can
        # represent; hold the relative error to a few ulps instead
        for x in (1e-12, 1e-8, 1e8, 1e15):
            want = float(mpmath.digamma(x))
            assert abs(digamma(x) - want) <= 1e-14 * abs(want)

    def test_recurrence_identity(self):
        # psi(x+1) = psi(x) + 1/x, the classic construction
        for x in (0.3, 1.7, 5.5, 42.0):
            assert digamma(x + 1) == pytest.approx(digamma(x) + 1.0 / x, abs=1e-12)

    @pytest.mark.parametrize("x", [0.0, -1.0, -0.5, float("nan")])
    def test_domain_error(self, x):
        with pytest.raises(DomainError):
            digamma(x)


class TestSampleMatrix:
    def test_rejects_non_finite(self):
        with pytest.raises(DomainError):
            SampleMatrix(np.array([[1.0], [np.nan]]))

    def test_rejects_single_sample(self):
        with pytest.raises(InsufficientSamplesError):
            SampleMatrix(np.ones((1, 3)))

    def test_shape_accessors(self):
        sm = SampleMatrix(np.zeros((10, 4)))
        assert (sm.n_samples, sm.dim) == (10, 4)


class TestKnnEntropy:
    def test_gaussian_2d_oracle(self):
        estimates = []
        for seed in range(5):
            rng = seeded_rng(seed, "test/gauss2")
            x = rng.standard_normal((5000, 2))
            estimates.append(knn_entropy(x, k=3, jitter_scale=1e-10, rng=rng))
        assert np.mean(estimates) == pytest.approx(2 * GAUSS_1D, abs=0.05)

    def test_uniform_oracle(self):
        estimates = []
        for seed in range(5):
            rng = seeded_rng(seed, "test/unif")
            x = rng.uniform(size=(5000, 1))
            estimates.append(knn_entropy(x, k=3, jitter_scale=1e-10, rng=rng))
        assert np.mean(estimates) == pytest.approx(0.0, abs=0.05)

    def test_duplicate_points_stay_finite(self):
        value = knn_entropy(np.ones((4, 2)), k=3, jitter_scale=1e-10, rng=seeded_rng(0, "dup"))
        assert math.isfinite(value)
        # dominated by the log of the jitter amplitude, not by data spread
        assert value < 2 * math.log(1e-6)

    def test_insufficient_samples(self):
        with pytest.raises(InsufficientSamplesError):
            knn_entropy(np.random.default_rng(0).normal(size=(3, 2)), k=3,
                        jitter_scale=1e-10, rng=seeded_rng(0, "x"))

    def test_non_finite_input_rejected(self):
        bad = np.full((10, 2), np.inf)
        with pytest.raises(DomainError):
            knn_entropy(bad, k=3, jitter_scale=1e-10, rng=seeded_rng(0, "x"))

    def test_consistency_improves_with_n(self):
        # |estimate - analytic| shrinks from N=500 to N=5000 for random SPD
        # covariances, averaged over 5 seeds, in each of d = 1, 2, 3
        for d in (1, 2, 3):
            errs = {}
            for n in (500, 5000):
                per_seed = []
                for seed in range(5):
                    rng = seeded_rng(seed, f"test/consist{d}")
                    a = rng.standard_normal((d, d))
                    cov = a @ a.T + 0.5 * np.eye(d)
                    x = rng.multivariate_normal(np.zeros(d), cov, size=n)
                    h = knn_entropy(x, k=3, jitter_scale=1e-10, rng=rng)
                    analytic = 0.5 * math.log(((2 * math.pi * math.e) ** d) * np.linalg.det(cov))
                    per_seed.append(abs(h - analytic))
                errs[n] = np.mean(per_seed)
            assert errs[5000] < errs[500]

    def test_row_permutation_invariance(self):
        # jitter applied up-front so the permuted call sees identical
        # coordinates per row identity
        rng = seeded_rng(3, "test/perm")
        x = rng.standard_normal((300, 3)) + rng.uniform(-1e-10, 1e-10, size=(300, 3))
        h1 = knn_entropy(x, k=3, jitter_scale=0.0, rng=None)
        perm = seeded_rng(4, "test/perm-order").permutation(300)
        h2 = knn_entropy(x[perm], k=3, jitter_scale=0.0, rng=None)
        assert abs(h1 - h2) <= 1e-9


class TestJointEntropy:
    def test_identical_matrices_finite(self):
        rng = seeded_rng(0, "test/joint-dup")
        a = rng.standard_normal((5000, 1))
        h = joint_entropy(a, a, k=3, jitter_scale=1e-10, rng=rng)
        assert math.isfinite(h)

    def test_independent_sums(self):
        rng = seeded_rng(1, "test/joint-ind")
        a = rng.standard_normal((5000, 1))
        b = rng.standard_normal((5000, 1))
        h = joint_entropy(a, b, k=3, jitter_scale=1e-10, rng=rng)
        assert h == pytest.approx(2 * GAUSS_1D, abs=0.1)

    def test_alignment_error(self):
        rng = seeded_rng(0, "test/joint-mis")
        with pytest.raises(AlignmentError):
            joint_entropy(np.zeros((100, 1)), np.zeros((99, 1)), k=3,
                          jitter_scale=1e-10, rng=rng)


class TestConditionalEntropy:
    def test_identical_matrices(self):
        rng = seeded_rng(0, "test/cond-dup")
        a = rng.standard_normal((2000, 1))
        h = conditional_entropy(a, a, k=3, jitter_scale=1e-10, rng=rng)
        assert math.isfinite(h)
        # H(X|X) = 0 analytically; the estimate collapses far below H(X)
        assert h < GAUSS_1D - 1.0

    def test_independent_equals_marginal(self):
        rng = seeded_rng(1, "test/cond-ind")
        a = rng.standard_normal((4000, 1))
        b = rng.standard_normal((4000, 1))
        h = conditional_entropy(a, b, k=3, jitter_scale=1e-10, rng=rng)
        assert h == pytest.approx(GAUSS_1D, abs=0.1)

    def test_correlated_oracle(self):
        rho = 0.9
        expected = 0.5 * math.log(2 * math.pi * math.e * (1 - rho**2))  # 0.5886
        rng = seeded_rng(2, "test/cond-corr")
        y = rng.standard_normal((4000, 1))
        x = rho * y + math.sqrt(1 - rho**2) * rng.standard_normal((4000, 1))
        h = conditional_entropy(x, y, k=3, jitter_scale=1e-10, rng=rng)
        assert h == pytest.approx(expected, abs=0.1)

    def test_conditioning_reduces_entropy(self):
        # margin >= 0.2 nats at rho = 0.9, N = 4000
        rho = 0.9
        rng = seeded_rng(5, "test/cond-reduce")
        y = rng.standard_normal((4000, 1))
        x = rho * y + math.sqrt(1 - rho**2) * rng.standard_normal((4000, 1))
        h_cond = conditional_entropy(x, y, k=3, jitter_scale=1e-10, rng=seeded_rng(6, "a"))
        h_marg = knn_entropy(x, k=3, jitter_scale=1e-10, rng=seeded_rng(6, "b"))
        assert h_marg - h_cond >= 0.2

    def test_alignment_error(self):
        with pytest.raises(AlignmentError):
            conditional_entropy(np.zeros((10, 1)), np.zeros((9, 1)), k=3,
                                jitter_scale=1e-10, rng=seeded_rng(0, "x"))

    def test_joint_row_permutation_invariance(self):
        # permute (prev, cur) rows with one permutation; jitter applied
        # up-front so each row identity keeps its draws
        rng = seeded_rng(8, "test/joint-perm")
        a = rng.standard_normal((200, 2)) + rng.uniform(-1e-10, 1e-10, size=(200, 2))
        b = rng.standard_normal((200, 3)) + rng.uniform(-1e-10, 1e-10, size=(200, 3))
        base_cond = conditional_entropy(a, b, k=3, jitter_scale=0.0, rng=None)
        base_joint = joint_entropy(a, b, k=3, jitter_scale=0.0, rng=None)
        perm = seeded_rng(9, "test/joint-perm-order").permutation(200)
        assert abs(conditional_entropy(a[perm], b[perm], k=3, jitter_scale=0.0, rng=None)
                   - base_cond) <= 1e-9
        assert abs(joint_entropy(a[perm], b[perm], k=3, jitter_scale=0.0, rng=None)
                   - base_joint) <= 1e-9

    def test_chain_rule_shared_stream(self):
        data = seeded_rng(7, "test/chain-data")
        worst = 0.0
        for i in range(10):
            n = int(data.integers(40, 150))
            a = data.standard_normal((n, int(data.integers(1, 4))))
            b = data.standard_normal((n, int(data.integers(1, 4))))
            label = f"test/chain/{i}"
            cond = conditional_entropy(a, b, k=3, jitter_scale=1e-8, rng=seeded_rng(1, label))
            marg = knn_entropy(b, k=3, jitter_scale=1e-8, rng=seeded_rng(1, label))
            joint = joint_entropy(a, b, k=3, jitter_scale=1e-8, rng=seeded_rng(1, label))
            worst = max(worst, abs(cond + marg - joint))
        assert worst <= 1e-12
