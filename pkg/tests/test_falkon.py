import numpy as np
import pytest

import wits.falkon as falkon_mod
from wits.falkon import (
    FalkonConfig,
    falkon_preconditioner,
    fda_falkon,
    kfda_witness_nystrom,
    select_centers,
)
from wits.kernels import Kernel, gram_matrix
from wits.witness import evaluate_witness, kfda_witness_exact


def _labels(n, m):
    return np.concatenate([np.ones(n, dtype=np.int64), -np.ones(m, dtype=np.int64)])


def _normalized(v):
    return v / np.linalg.norm(v)


class TestSelectCenters:
    def test_full_subsample_is_permutation(self):
        rng = np.random.default_rng(0)
        z = rng.normal(size=(12, 2))
        lab = _labels(6, 6)
        zm, lm = select_centers(z, lab, 12, seed=3)
        order = np.lexsort(z.T)
        order_m = np.lexsort(zm.T)
        np.testing.assert_array_equal(zm[order_m], z[order])
        # labels stay aligned with their points
        for point, label in zip(zm, lm):
            i = int(np.where((z == point).all(axis=1))[0][0])
            assert lab[i] == label

    def test_single_center_comes_from_input(self):
        rng = np.random.default_rng(1)
        z = rng.normal(size=(5, 2))
        lab = _labels(3, 2)
        zm, lm = select_centers(z, lab, 1, seed=0)
        assert any((z[i] == zm[0]).all() and lab[i] == lm[0] for i in range(5))

    def test_deterministic(self):
        rng = np.random.default_rng(2)
        z = rng.normal(size=(30, 2))
        lab = _labels(15, 15)
        a = select_centers(z, lab, 10, seed=9)
        b = select_centers(z, lab, 10, seed=9)
        np.testing.assert_array_equal(a[0], b[0])
        np.testing.assert_array_equal(a[1], b[1])

    def test_too_many_centers_rejected(self):
        with pytest.raises(ValueError):
            select_centers(np.zeros((3, 1)), _labels(2, 1), 4, seed=0)


class TestPreconditioner:
    def test_dense_oracle_m2(self):
        z = np.array([[0.0, 0.0], [1.0, 0.5]])
        lab = np.array([1, -1])
        k, lam = Kernel(0.8), 0.05
        t_low, a_low = falkon_preconditioner(z, lab, k, lam)
        k_mm = gram_matrix(k, z)
        jit1 = 1e-10 * np.trace(k_mm) / 2
        t_oracle = np.linalg.cholesky(k_mm + jit1 * np.eye(2))
        # singleton label groups center to zero, so the inner matrix is lambda I
        inner = lam * np.eye(2)
        jit2 = 1e-10 * np.trace(inner) / 2
        a_oracle = np.linalg.cholesky(inner + jit2 * np.eye(2))
        np.testing.assert_allclose(t_low, t_oracle, atol=1e-8)
        np.testing.assert_allclose(a_low, a_oracle, atol=1e-8)

    def test_single_class_singleton_gives_sqrt_lambda(self):
        z = np.array([[0.4, 0.4]])
        t_low, a_low = falkon_preconditioner(z, np.array([1]), Kernel(1.0), 0.25)
        np.testing.assert_allclose(a_low, [[0.5]], atol=1e-8)
        np.testing.assert_allclose(t_low, [[1.0]], atol=1e-8)

    def test_identity_gram_far_points(self):
        # tiny bandwidth: off-diagonal kernel values underflow to 0 exactly
        z = np.array([[0.0, 0.0], [50.0, 0.0], [0.0, 50.0], [50.0, 50.0]])
        lab = np.array([1, 1, -1, -1])
        lam = 0.3
        t_low, a_low = falkon_preconditioner(z, lab, Kernel(0.01), lam)
        np.testing.assert_allclose(t_low, np.eye(4), atol=1e-5)
        n_m = np.zeros((4, 4))
        p2 = np.eye(2) - 0.5
        n_m[:2, :2] = p2
        n_m[2:, 2:] = p2
        a_oracle = np.linalg.cholesky(
            n_m / 4 + lam * np.eye(4) + 1e-10 * np.trace(n_m / 4 + lam * np.eye(4)) / 4 * np.eye(4)
        )
        np.testing.assert_allclose(a_low, a_oracle, atol=1e-5)

    def test_implied_operator_identity(self):
        # B B^T == ((1/M) K N K + lambda K)^-1 with B = (U_A U_T)^-1
        rng = np.random.default_rng(3)
        z = rng.normal(size=(9, 2))
        lab = _labels(5, 4)
        k, lam = Kernel(1.1), 0.07
        t_low, a_low = falkon_preconditioner(z, lab, k, lam)
        k_mm = gram_matrix(k, z)
        n_mat = np.zeros((9, 9))
        n_mat[:5, :5] = np.eye(5) - 1.0 / 5
        n_mat[5:, 5:] = np.eye(4) - 1.0 / 4
        target = np.linalg.inv(k_mm @ n_mat @ k_mm / 9 + lam * k_mm)
        b = np.linalg.inv(a_low.T @ t_low.T)
        np.testing.assert_allclose(b @ b.T, target, rtol=1e-5, atol=1e-7)


class TestFdaFalkon:
    def test_hand_two_point_system(self):
        # n = m = 1: centering vanishes, so ((n+m) lambda K) alpha = K delta
        z = np.array([[0.0, 0.0], [1.0, 1.0]])
        lab = np.array([1, -1])
        lam = 0.2
        res = fda_falkon(z, lab, Kernel(1.0), lam, num_centers=2, cg_iterations=20, seed=0)
        order = np.argsort(res.center_labels)[::-1]
        np.testing.assert_allclose(
            res.coefficients[order], [1 / (2 * lam), -1 / (2 * lam)], rtol=1e-8
        )

    def test_full_centers_match_exact_solver(self):
        rng = np.random.default_rng(4)
        x = rng.normal(size=(40, 2))
        y = rng.normal(size=(40, 2)) + 0.4
        k, lam = Kernel(1.0), 1e-2
        exact = kfda_witness_exact(k, lam, x, y)
        approx = kfda_witness_nystrom(k, lam, x, y, num_centers=80, cg_iterations=100,
                                      seed=7, c=0.5)
        grid = rng.normal(size=(50, 2))
        pe = _normalized(evaluate_witness(exact, grid))
        pa = _normalized(evaluate_witness(approx, grid))
        assert np.linalg.norm(pe - pa) <= 1e-4

    def test_first_iteration_reduces_residual(self):
        rng = np.random.default_rng(5)
        z = np.vstack([rng.normal(size=(10, 2)), rng.normal(size=(8, 2)) + 1.0])
        res = fda_falkon(z, _labels(10, 8), Kernel(0.9), 0.05, 6, cg_iterations=1, seed=1)
        assert len(res.residual_norms) == 2
        assert res.residual_norms[1] < res.residual_norms[0]

    def test_residual_norms_non_increasing(self):
        for seed in range(8):
            rng = np.random.default_rng(seed)
            n, m = int(rng.integers(5, 40)), int(rng.integers(5, 40))
            z = np.vstack([rng.normal(size=(n, 2)), rng.normal(size=(m, 2)) + 0.5])
            num = int(rng.integers(2, n + m + 1))
            res = fda_falkon(
                z, _labels(n, m), Kernel(float(10 ** rng.uniform(-1, 0.5))),
                float(10 ** rng.uniform(-3, 1)), num, cg_iterations=30, seed=seed,
                c=None if seed % 2 else 0.5,
            )
            r = res.residual_norms
            assert (r[1:] <= r[:-1] * (1 + 1e-12)).all()

    def test_prediction_stability_beyond_convergence(self):
        rng = np.random.default_rng(6)
        x = rng.normal(size=(30, 2))
        y = rng.normal(size=(30, 2)) + 0.5
        k, lam = Kernel(1.0), 1e-2
        w1 = kfda_witness_nystrom(k, lam, x, y, 20, cg_iterations=60, seed=3)
        w2 = kfda_witness_nystrom(k, lam, x, y, 20, cg_iterations=120, seed=3)
        grid = rng.normal(size=(40, 2))
        v1, v2 = evaluate_witness(w1, grid), evaluate_witness(w2, grid)
        assert np.max(np.abs(v1 - v2)) < 1e-8

    def test_deterministic(self):
        rng = np.random.default_rng(7)
        z = np.vstack([rng.normal(size=(12, 2)), rng.normal(size=(12, 2))])
        lab = _labels(12, 12)
        r1 = fda_falkon(z, lab, Kernel(1.0), 0.1, 8, 20, seed=11)
        r2 = fda_falkon(z, lab, Kernel(1.0), 0.1, 8, 20, seed=11)
        np.testing.assert_array_equal(r1.coefficients, r2.coefficients)
        np.testing.assert_array_equal(r1.centers, r2.centers)

    def test_no_full_gram_allocated(self, monkeypatch):
        # structural memory check: every Gram block built inside the module
        # must have at least one dimension bounded by M
        shapes = []
        original = falkon_mod.gram_matrix

        def recording(kernel, a, b=None):
            out = original(kernel, a, b)
            shapes.append(out.shape)
            return out

        monkeypatch.setattr(falkon_mod, "gram_matrix", recording)
        rng = np.random.default_rng(8)
        n = 300
        z = np.vstack([rng.normal(size=(n, 2)), rng.normal(size=(n, 2)) + 0.3])
        num_centers = 40
        fda_falkon(z, _labels(n, n), Kernel(0.8), 1e-2, num_centers, 10, seed=2)
        assert shapes, "no Gram matrices recorded"
        assert all(min(s) <= num_centers for s in shapes)
        assert any(max(s) == 2 * n for s in shapes)  # the (M, n+m) cross block

    def test_gram_work_scales_linearly_in_data(self, monkeypatch):
        # at fixed M and t, total kernel evaluations grow linearly with n+m
        totals = {}
        original = falkon_mod.gram_matrix

        def recording(kernel, a, b=None):
            out = original(kernel, a, b)
            totals["count"] = totals.get("count", 0) + out.size
            return out

        monkeypatch.setattr(falkon_mod, "gram_matrix", recording)
        rng = np.random.default_rng(9)
        counts = []
        for n in (100, 200, 400):
            totals["count"] = 0
            z = np.vstack([rng.normal(size=(n, 2)), rng.normal(size=(n, 2))])
            fda_falkon(z, _labels(n, n), Kernel(0.8), 1e-2, 25, 10, seed=2)
            counts.append(totals["count"])
        base_fixed = counts[0] - 25 * 200  # subtract the linear part
        for n, count in zip((100, 200, 400), counts):
            assert count == pytest.approx(base_fixed + 25 * 2 * n, abs=1)

    def test_error_cases(self):
        z = np.zeros((4, 1))
        with pytest.raises(ValueError, match="both classes"):
            fda_falkon(z, np.ones(4, dtype=int), Kernel(1.0), 0.1, 2, 5)
        with pytest.raises(ValueError):
            fda_falkon(z, _labels(2, 2), Kernel(1.0), 0.1, 2, 0)
        with pytest.raises(ValueError):
            FalkonConfig(num_centers=0, cg_iterations=5, lam=0.1)
        with pytest.raises(ValueError):
            FalkonConfig(num_centers=2, cg_iterations=5, lam=0.0)


class TestNystromWitness:
    def test_orientation_on_training_means(self):
        rng = np.random.default_rng(10)
        x = rng.normal(size=(25, 2))
        y = rng.normal(size=(25, 2)) + 0.6
        for first, second in ((x, y), (y, x)):
            w = kfda_witness_nystrom(Kernel(1.0), 1e-2, first, second, 15, 30, seed=4)
            gap = evaluate_witness(w, first).mean() - evaluate_witness(w, second).mean()
            assert gap >= -1e-12

    def test_deterministic(self):
        rng = np.random.default_rng(11)
        x, y = rng.normal(size=(20, 2)), rng.normal(size=(20, 2))
        w1 = kfda_witness_nystrom(Kernel(1.0), 1e-2, x, y, 10, 20, seed=5)
        w2 = kfda_witness_nystrom(Kernel(1.0), 1e-2, x, y, 10, 20, seed=5)
        np.testing.assert_array_equal(w1.coefficients, w2.coefficients)
