import numpy as np
import pytest

from conftest import random_spd, random_unit_rows
from embed_infolab import covdist as cd
from embed_infolab.entropy import EmbeddingMatrix
from embed_infolab.errors import ConfigurationError, DomainError, NumericalError, ShapeError

ALL_DISTANCES = [cd.dist_logdet, cd.dist_js, cd.dist_riemann, cd.dist_loge, cd.dist_frobenius]


def spd(rng, d, floor=0.1):
    return cd.SpdMatrix(random_spd(rng, d, floor))


class TestSpdMatrix:
    def test_asymmetric_rejected(self):
        with pytest.raises(DomainError, match="symmetric"):
            cd.SpdMatrix(np.array([[1.0, 0.5], [0.2, 1.0]]))

    def test_negative_eigenvalue_rejected(self):
        with pytest.raises(DomainError, match="PSD"):
            cd.SpdMatrix(np.diag([1.0, -0.5]))

    def test_psd_with_roundoff_accepted(self):
        cd.SpdMatrix(np.diag([1.0, -0.5e-10]))  # within the -1e-10 fuzz

    def test_strict_pd_jitters_only_singular_inputs(self):
        healthy = cd.SpdMatrix(np.diag([2.0, 1.0]))
        np.testing.assert_array_equal(healthy.strict_pd(), healthy.values)
        singular = cd.SpdMatrix(np.diag([1.0, 0.0]))
        jittered = singular.strict_pd()
        assert np.linalg.eigvalsh(jittered)[0] > 0


class TestSummarize:
    def test_single_row(self, rng):
        row = rng.standard_normal(4)
        z = EmbeddingMatrix(row[None, :])
        assert np.array_equal(cd.summarize(z, "mean").payload, row)
        assert np.array_equal(cd.summarize(z, "last_token").payload, row)
        np.testing.assert_allclose(
            cd.summarize(z, "covariance").payload.values, np.outer(row, row), atol=1e-15
        )

    def test_opposite_rows(self, rng):
        row = rng.standard_normal(3)
        z = EmbeddingMatrix(np.stack([row, -row]))
        np.testing.assert_allclose(cd.summarize(z, "mean").payload, np.zeros(3), atol=1e-16)
        np.testing.assert_allclose(
            cd.summarize(z, "covariance").payload.values, np.outer(row, row), atol=1e-15
        )

    def test_covariance_matches_loop_oracle(self, rng):
        vals = rng.standard_normal((6, 4))
        got = cd.summarize(EmbeddingMatrix(vals), "covariance").payload.values
        want = np.zeros((4, 4))
        for row in vals:
            want += np.outer(row, row)
        want /= 6
        np.testing.assert_allclose(got, want, atol=1e-12)

    def test_centering_flag(self, rng):
        vals = rng.standard_normal((5, 3)) + 7.0
        centered = cd.summarize(EmbeddingMatrix(vals), "covariance", center=True).payload.values
        want = np.cov(vals.T, bias=True)
        np.testing.assert_allclose(centered, want, atol=1e-12)

    def test_unknown_mode(self, rng):
        with pytest.raises(ConfigurationError):
            cd.summarize(EmbeddingMatrix(rng.standard_normal((2, 2))), "median")


class TestDistanceValues:
    def test_logdet_scalar_case(self):
        a = cd.SpdMatrix(np.array([[1.0]]))
        b = cd.SpdMatrix(np.array([[9.0]]))
        assert cd.dist_logdet(a, b) == pytest.approx(np.sqrt(np.log(5) - np.log(3)), rel=1e-12)

    def test_js_scalar_case(self):
        a = cd.SpdMatrix(np.array([[1.0]]))
        b = cd.SpdMatrix(np.array([[3.0]]))
        want = np.sqrt(np.log(3) - (np.log(2) + np.log(4)) / 2)
        assert cd.dist_js(a, b, gamma=1.0) == pytest.approx(want, rel=1e-12)

    def test_riemann_scaled_identity(self):
        c, d = 4.0, 5
        a = cd.SpdMatrix(c * np.eye(d))
        b = cd.SpdMatrix(np.eye(d))
        assert cd.dist_riemann(a, b) == pytest.approx(np.sqrt(d) * np.log(c), rel=1e-10)

    def test_loge_e_identity(self):
        d = 4
        a = cd.SpdMatrix(np.e * np.eye(d))
        b = cd.SpdMatrix(np.eye(d))
        assert cd.dist_loge(a, b) == pytest.approx(np.sqrt(d), rel=1e-12)

    def test_frobenius_unit_perturbation(self):
        d = 3
        a = np.eye(d)
        b = a.copy()
        b[0, 0] += 1.0
        assert cd.dist_frobenius(cd.SpdMatrix(a), cd.SpdMatrix(b)) == 1.0

    def test_frobenius_matches_loop_oracle(self, rng):
        a, b = spd(rng, 5), spd(rng, 5)
        want = np.sqrt(np.sum((a.values - b.values) ** 2))
        assert cd.dist_frobenius(a, b) == pytest.approx(want, abs=1e-13)

    def test_frobenius_shape_mismatch(self, rng):
        with pytest.raises(ShapeError):
            cd.dist_frobenius(spd(rng, 3), spd(rng, 4))


class TestDistanceAxioms:
    @pytest.mark.parametrize("fn", ALL_DISTANCES)
    def test_self_distance_zero_and_symmetry(self, fn, rng):
        for _ in range(10):
            a, b = spd(rng, 4), spd(rng, 4)
            assert fn(a, a) <= 1e-10
            assert abs(fn(a, b) - fn(b, a)) <= 1e-10

    @pytest.mark.parametrize("fn", [cd.dist_riemann, cd.dist_loge])
    def test_triangle_inequality(self, fn, rng):
        for _ in range(50):
            a, b, c = (spd(rng, 3) for _ in range(3))
            assert fn(a, b) <= fn(a, c) + fn(c, b) + 1e-9

    def test_riemann_affine_invariance(self, rng):
        for _ in range(10):
            a, b = spd(rng, 4), spd(rng, 4)
            m = rng.standard_normal((4, 4)) + 0.5 * np.eye(4)
            ta = cd.SpdMatrix(m.T @ a.values @ m)
            tb = cd.SpdMatrix(m.T @ b.values @ m)
            assert cd.dist_riemann(ta, tb) == pytest.approx(cd.dist_riemann(a, b), abs=1e-8)

    def test_js_radicand_nonnegative_on_psd(self, rng):
        # includes rank-deficient PSD pairs; concavity of log det keeps the
        # radicand nonnegative so no NumericalError should fire
        for i in range(500):
            d = int(rng.integers(2, 6))
            rank = int(rng.integers(1, d + 1))
            q1 = rng.standard_normal((d, rank))
            q2 = rng.standard_normal((d, rank))
            a = cd.SpdMatrix(q1 @ q1.T)
            b = cd.SpdMatrix(q2 @ q2.T)
            assert cd.dist_js(a, b) >= 0.0

    def test_nonpd_rejected_where_strictness_required(self):
        a = cd.SpdMatrix(np.zeros((3, 3)))
        b = cd.SpdMatrix(np.eye(3))
        with pytest.raises(DomainError):
            cd.dist_riemann(a, b)


class TestJsTaylor:
    def test_scalar_leading_term(self):
        # d=1, A=2, B=1: d_js^2 = log(1+3g/2) - (log(1+2g) + log(1+g))/2,
        # whose expansion starts exactly at g^2/8 = (g^2/8)*||A-B||_F^2
        a = cd.SpdMatrix(np.array([[2.0]]))
        b = cd.SpdMatrix(np.array([[1.0]]))
        for g in (1e-3, 1e-4):
            direct = np.log(1 + 1.5 * g) - (np.log(1 + 2 * g) + np.log(1 + g)) / 2
            assert cd.dist_js(a, b, g) ** 2 == pytest.approx(direct, rel=1e-8)
            ((_, ratio),) = cd.verify_js_taylor(a, b, [g])
            assert ratio == pytest.approx(1.0, abs=3 * g)

    def test_ratios_monotone_toward_one(self, rng):
        a, b = spd(rng, 5), spd(rng, 5)
        ratios = cd.verify_js_taylor(a, b, [1e-2, 1e-3, 1e-4])
        gaps = [abs(r - 1) for _, r in ratios]
        assert gaps[0] > gaps[1] > gaps[2]
        assert gaps[2] < 1e-3

    def test_linear_remainder_rate(self, rng):
        a, b = spd(rng, 4), spd(rng, 4)
        pairs = cd.verify_js_taylor(a, b, [1e-2, 5e-3, 1e-3, 1e-4])
        # estimate the slope c from the two largest gammas, then check all
        c = abs(pairs[0][1] - 1) / pairs[0][0]
        for g, ratio in pairs:
            assert abs(ratio - 1) <= 1.5 * c * g + 1e-12

    def test_identical_inputs_rejected(self, rng):
        a = spd(rng, 3)
        with pytest.raises(DomainError, match="coincide"):
            cd.verify_js_taylor(a, a, [1e-3])

    def test_gamma_above_admissible_range_rejected(self, rng):
        a = cd.SpdMatrix(np.eye(3) * 2.0)
        b = cd.SpdMatrix(np.eye(3))
        with pytest.raises(DomainError, match="range"):
            cd.verify_js_taylor(a, b, [1.0])


class TestPca:
    def test_collinear_points_preserve_distances(self):
        direction = np.array([1.0, 2.0, -1.0])
        pts = np.array([t * direction for t in (-2.0, 0.0, 1.0, 3.5)])
        proj = cd.pca_project(pts, 1)
        before = np.abs(np.linalg.norm(pts[:, None] - pts[None, :], axis=2))
        after = np.abs(proj[:, None, 0] - proj[None, :, 0])
        np.testing.assert_allclose(after, before, atol=1e-12)

    def test_subspace_points_reconstruct_exactly(self, rng):
        basis = np.linalg.qr(rng.standard_normal((6, 2)))[0]
        pts = rng.standard_normal((8, 2)) @ basis.T
        proj = cd.pca_project(pts, 2)
        before = np.linalg.norm(pts[:, None] - pts[None, :], axis=2)
        after = np.linalg.norm(proj[:, None] - proj[None, :], axis=2)
        np.testing.assert_allclose(after, before, atol=1e-10)

    def test_full_rank_isometry(self, rng):
        pts = rng.standard_normal((9, 5))
        proj = cd.pca_project(pts, 5)
        before = np.linalg.norm(pts[:, None] - pts[None, :], axis=2)
        after = np.linalg.norm(proj[:, None] - proj[None, :], axis=2)
        np.testing.assert_allclose(after, before, atol=1e-10)

    def test_matches_svd_oracle_distances(self, rng):
        pts = rng.standard_normal((12, 7))
        proj = cd.pca_project(pts, 3)
        centered = pts - pts.mean(axis=0)
        u, s, _ = np.linalg.svd(centered, full_matrices=False)
        oracle = u[:, :3] * s[:3]
        before = np.linalg.norm(oracle[:, None] - oracle[None, :], axis=2)
        after = np.linalg.norm(proj[:, None] - proj[None, :], axis=2)
        np.testing.assert_allclose(after, before, atol=1e-10)

    def test_sign_convention_fixed(self, rng):
        pts = rng.standard_normal((10, 4))
        p1 = cd.pca_project(pts, 2)
        p2 = cd.pca_project(pts.copy(), 2)
        np.testing.assert_array_equal(p1, p2)

    def test_bad_arguments(self, rng):
        with pytest.raises(DomainError, match="k"):
            cd.pca_project(rng.standard_normal((5, 3)), 4)
        with pytest.raises(DomainError, match="2 points"):
            cd.pca_project(rng.standard_normal((1, 3)), 1)


class TestDistanceMatrix:
    def _sentences(self, rng, mode, count=4):
        out = []
        for _ in range(count):
            z = EmbeddingMatrix(random_unit_rows(rng, 6, 4))
            out.append(cd.summarize(z, mode))
        return out

    def test_single_sentence(self, rng):
        mat = cd.distance_matrix(self._sentences(rng, "mean", 1), "l2")
        np.testing.assert_array_equal(mat, np.zeros((1, 1)))

    def test_duplicates_give_zero_off_diagonals(self, rng):
        s = self._sentences(rng, "covariance", 1)[0]
        mat = cd.distance_matrix([s, s, s], "js")
        np.testing.assert_allclose(mat, np.zeros((3, 3)), atol=1e-12)

    def test_symmetric_zero_diagonal_nonnegative(self, rng):
        mat = cd.distance_matrix(self._sentences(rng, "covariance"), "logdet")
        np.testing.assert_allclose(mat, mat.T, atol=0)
        assert np.all(np.diag(mat) == 0)
        assert np.all(mat >= 0)

    def test_mode_metric_mismatch(self, rng):
        with pytest.raises(ConfigurationError, match="incompatible"):
            cd.distance_matrix(self._sentences(rng, "mean"), "riemann")
        with pytest.raises(ConfigurationError, match="incompatible"):
            cd.distance_matrix(self._sentences(rng, "covariance"), "l2")

    def test_parallel_equals_serial(self, rng):
        sentences = self._sentences(rng, "covariance", 6)
        serial = cd.distance_matrix(sentences, "js", max_workers=1)
        parallel = cd.distance_matrix(sentences, "js", max_workers=4)
        np.testing.assert_array_equal(serial, parallel)

    def test_mixed_modes_rejected(self, rng):
        a = self._sentences(rng, "mean", 1)
        b = self._sentences(rng, "last_token", 1)
        with pytest.raises(ConfigurationError, match="share"):
            cd.distance_matrix(a + b, "l2")
