import itertools

import numpy as np
import pytest

from mumimo import modem
from mumimo.detectors import (
    df_detect,
    linear_detect,
    ml_detect,
    mmse_filter,
    rmf_filter,
    sic_detect,
    single_pass_df_filters,
    zf_filter,
)
from mumimo.numerics import SingularMatrixError


def random_cmatrix(rng, rows, cols):
    return (rng.standard_normal((rows, cols)) + 1j * rng.standard_normal((rows, cols))) / np.sqrt(2)


def random_qpsk(rng, n):
    return modem.modulate(rng.integers(0, 2, size=2 * n))


def ml_reference(r, h):
    """Independent exhaustive enumeration via itertools, kept separate from
    the vectorized implementation under test."""
    best = None
    best_obj = np.inf
    for combo in itertools.product(modem.QPSK.points, repeat=h.shape[1]):
        s = np.array(combo)
        obj = float(np.sum(np.abs(r - h @ s) ** 2))
        if obj < best_obj:
            best_obj = obj
            best = s
    return best, best_obj


class TestMl:
    def test_zero_noise_recovery(self):
        rng = np.random.default_rng(0)
        h = random_cmatrix(rng, 6, 2)
        s = random_qpsk(rng, 2)
        assert np.array_equal(ml_detect(h @ s, h), s)

    def test_scalar_nearest_point(self):
        got = ml_detect(np.array([0.6 + 0.7j]), np.array([[1.0 + 0j]]))
        assert np.allclose(got, [(1 + 1j) / np.sqrt(2)])

    def test_matches_independent_enumeration(self):
        rng = np.random.default_rng(1)
        for _ in range(25):
            h = random_cmatrix(rng, 4, 2)
            s = random_qpsk(rng, 2)
            noise = 0.5 * (rng.standard_normal(4) + 1j * rng.standard_normal(4))
            r = h @ s + noise
            got = ml_detect(r, h)
            want, want_obj = ml_reference(r, h)
            got_obj = float(np.sum(np.abs(r - h @ got) ** 2))
            assert got_obj <= want_obj + 1e-12
            assert np.array_equal(got, want)

    def test_cap(self):
        with pytest.raises(ValueError, match="cap"):
            ml_detect(np.zeros(12), np.ones((12, 11), dtype=complex))


class TestLinearFilters:
    def test_rmf_identity_channel(self):
        r = random_qpsk(np.random.default_rng(2), 3)
        assert np.array_equal(linear_detect(rmf_filter(np.eye(3, dtype=complex)), r), r)

    def test_rmf_orthogonal_columns(self):
        h = np.zeros((4, 2), dtype=complex)
        h[0, 0] = 1.0
        h[1, 1] = 1.0
        s = random_qpsk(np.random.default_rng(3), 2)
        assert np.array_equal(linear_detect(rmf_filter(h), h @ s), s)

    def test_rmf_matches_per_stream_correlation(self):
        rng = np.random.default_rng(4)
        h = random_cmatrix(rng, 8, 3)
        r = rng.standard_normal(8) + 1j * rng.standard_normal(8)
        got = linear_detect(rmf_filter(h), r)
        want = modem.hard_slice(np.array([np.sum(h[:, j].conj() * r) for j in range(3)]))
        assert np.array_equal(got, want)

    def test_mmse_identity_channel(self):
        f = mmse_filter(np.eye(4, dtype=complex), 1.0, 1.0)
        assert np.allclose(f.w, 0.5 * np.eye(4))

    def test_mmse_zf_limit(self):
        rng = np.random.default_rng(5)
        h = random_cmatrix(rng, 8, 4)
        f = mmse_filter(h, 1.0, 1e-8)
        assert np.linalg.norm(f.w.conj().T @ h - np.eye(4)) <= 1e-4

    def test_mmse_push_through_identity(self):
        rng = np.random.default_rng(6)
        h = random_cmatrix(rng, 8, 4)
        f = mmse_filter(h, sigma_s2=2.0, sigma_n2=0.5)
        reg = 0.5 / 2.0
        want = h @ np.linalg.inv(h.conj().T @ h + reg * np.eye(4))
        assert np.linalg.norm(f.w - want) <= 1e-10

    def test_mmse_paper_loading_switch(self):
        rng = np.random.default_rng(7)
        h = random_cmatrix(rng, 6, 3)
        std = mmse_filter(h, 1.0, 0.1).w
        paper = mmse_filter(h, 1.0, 0.1, loading="inverted").w
        assert not np.allclose(std, paper)

    def test_zf_identity(self):
        assert np.allclose(zf_filter(np.eye(3, dtype=complex)).w, np.eye(3))

    def test_zf_scalar_pseudo_inverse(self):
        f = zf_filter(np.array([[2.0 + 0j], [0.0 + 0j]]))
        assert np.allclose(f.w, [[0.5], [0.0]])
        assert np.allclose(f.w.conj().T @ np.array([[2.0 + 0j], [0.0]]), [[1.0]])

    def test_zf_nulling(self):
        rng = np.random.default_rng(8)
        h = random_cmatrix(rng, 16, 4)
        f = zf_filter(h)
        assert np.linalg.norm(f.w.conj().T @ h - np.eye(4)) <= 1e-9

    def test_zf_zero_noise_exact(self):
        rng = np.random.default_rng(9)
        h = random_cmatrix(rng, 16, 4)
        s = random_qpsk(rng, 4)
        assert np.array_equal(linear_detect(zf_filter(h), h @ s), s)

    def test_zf_rank_deficient(self):
        with pytest.raises(SingularMatrixError):
            zf_filter(np.ones((4, 2), dtype=complex))

    def test_filter_shapes(self):
        rng = np.random.default_rng(10)
        h = random_cmatrix(rng, 12, 4)
        for f in (rmf_filter(h), mmse_filter(h, 1.0, 0.5), zf_filter(h)):
            assert f.w.shape == (12, 4)

    def test_linear_detect_matches_composition(self):
        rng = np.random.default_rng(11)
        h = random_cmatrix(rng, 8, 3)
        f = mmse_filter(h, 1.0, 0.3)
        r = rng.standard_normal(8) + 1j * rng.standard_normal(8)
        assert np.array_equal(
            linear_detect(f, r), modem.hard_slice(f.w.conj().T @ r)
        )


class TestSic:
    def test_diagonal_channel_any_order(self):
        rng = np.random.default_rng(12)
        h = np.diag([1.0, 2.0, 3.0]).astype(complex)
        s = random_qpsk(rng, 3)
        for rule in ("sinr", "column_norm", "natural"):
            got = sic_detect(h, h @ s, 1.0, 1e-6, ordering_rule=rule)
            assert np.array_equal(got, s)

    def test_single_pass_no_coupling_equals_linear(self):
        # With a diagonal coupling matrix the feedback term vanishes and the
        # one-shot DF is exactly the linear MMSE detector.
        rng = np.random.default_rng(13)
        h = np.diag([1.5, 0.8]).astype(complex)
        s = random_qpsk(rng, 2)
        r = h @ s + 0.1 * (rng.standard_normal(2) + 1j * rng.standard_normal(2))
        df = sic_detect(h, r, 1.0, 0.01, deflate=False)
        lin = linear_detect(mmse_filter(h, 1.0, 0.01), r)
        assert np.array_equal(df, lin)

    def test_single_pass_equals_deflating_on_diagonal(self):
        rng = np.random.default_rng(14)
        h = np.diag([2.0, 1.0, 0.5]).astype(complex)
        s = random_qpsk(rng, 3)
        r = h @ s + 0.05 * (rng.standard_normal(3) + 1j * rng.standard_normal(3))
        a = sic_detect(h, r, 1.0, 0.01, deflate=True)
        b = sic_detect(h, r, 1.0, 0.01, deflate=False)
        assert np.array_equal(a, b)

    def test_feedback_strictly_lower_in_detection_order(self):
        rng = np.random.default_rng(15)
        h = random_cmatrix(rng, 8, 4)
        filters = single_pass_df_filters(h, 1.0, 0.2)
        assert filters.f is not None
        assert np.all(np.triu(filters.f) == 0)
        assert sorted(filters.ordering) == [0, 1, 2, 3]

    def test_ordering_is_permutation(self):
        rng = np.random.default_rng(16)
        h = random_cmatrix(rng, 10, 5)
        for rule in ("sinr", "column_norm", "natural"):
            filters = single_pass_df_filters(h, 1.0, 0.5, ordering_rule=rule)
            assert sorted(filters.ordering) == list(range(5))

    def test_sic_beats_linear_mmse_in_aggregate(self):
        # Paired comparison over random instances at 20 dB.
        rng = np.random.default_rng(17)
        sigma_n2 = 4.0 / 100.0
        sic_errors = 0
        lin_errors = 0
        for _ in range(100):
            h = random_cmatrix(rng, 8, 4)
            s = random_qpsk(rng, 4)
            noise = np.sqrt(sigma_n2 / 2) * (
                rng.standard_normal(8) + 1j * rng.standard_normal(8)
            )
            r = h @ s + noise
            sic_errors += int(np.count_nonzero(sic_detect(h, r, 1.0, sigma_n2) != s))
            lin_errors += int(
                np.count_nonzero(linear_detect(mmse_filter(h, 1.0, sigma_n2), r) != s)
            )
        assert sic_errors <= lin_errors

    def test_matrix_observation_batches(self):
        rng = np.random.default_rng(18)
        h = random_cmatrix(rng, 8, 3)
        s = modem.modulate(rng.integers(0, 2, size=2 * 3 * 10)).reshape(3, 10)
        got = sic_detect(h, h @ s, 1.0, 1e-9)
        assert got.shape == (3, 10)
        assert np.array_equal(got, s)

    def test_ml_dominance_in_residual(self):
        rng = np.random.default_rng(19)
        for _ in range(20):
            h = random_cmatrix(rng, 6, 2)
            s = random_qpsk(rng, 2)
            r = h @ s + 0.7 * (rng.standard_normal(6) + 1j * rng.standard_normal(6))
            s_ml = ml_detect(r, h)
            obj_ml = float(np.sum(np.abs(r - h @ s_ml) ** 2))
            for other in (
                linear_detect(mmse_filter(h, 1.0, 0.49), r),
                linear_detect(zf_filter(h), r),
                sic_detect(h, r, 1.0, 0.49),
            ):
                obj = float(np.sum(np.abs(r - h @ other) ** 2))
                assert obj_ml <= obj + 1e-12
