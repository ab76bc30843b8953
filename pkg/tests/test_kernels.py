import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from enprolab.data import DescriptorSet
from enprolab.errors import DimensionError, DomainError, InsufficientDataError, ParameterError
from enprolab.kernels import (
    averaged_chi2_distance,
    averaged_chi2_matrix,
    build_gram,
    chi2_distance,
    mean_distance_bandwidth,
    write_gram_csv,
)


def one_group(rows, labels=None):
    rows = np.asarray(rows, dtype=float)
    labels = np.zeros(len(rows), dtype=int) if labels is None else labels
    return DescriptorSet((rows,), labels, int(np.max(labels)) + 1)


hist = arrays(np.float64, 5, elements=st.floats(0, 10))


class TestChi2Distance:
    def test_identical(self):
        assert chi2_distance([0.2, 0.3, 0.5], [0.2, 0.3, 0.5]) == 0.0

    def test_disjoint(self):
        assert chi2_distance([1, 0], [0, 1]) == pytest.approx(1.0, abs=1e-15)

    def test_partial_overlap(self):
        assert chi2_distance([0.5, 0.5], [1, 0]) == pytest.approx(1 / 3, abs=1e-15)

    def test_empty_bins_contribute_nothing(self):
        assert chi2_distance([0, 0, 1], [0, 0, 1]) == 0.0

    def test_errors(self):
        with pytest.raises(DimensionError):
            chi2_distance([1, 0], [1, 0, 0])
        with pytest.raises(DomainError):
            chi2_distance([1, -0.1], [1, 0])

    @settings(max_examples=100)
    @given(hist, hist)
    def test_symmetric_non_negative(self, h, g):
        d = chi2_distance(h, g)
        assert d >= 0
        assert d == pytest.approx(chi2_distance(g, h), rel=1e-12, abs=1e-300)


class TestAveraged:
    def test_single_group(self):
        assert averaged_chi2_distance([[0.5, 0.5]], [[1, 0]]) == chi2_distance([0.5, 0.5], [1, 0])

    def test_identity(self):
        x = [np.array([0.1, 0.9]), np.array([0.3, 0.3, 0.4])]
        assert averaged_chi2_distance(x, x) == 0.0

    def test_two_groups(self):
        assert averaged_chi2_distance([[1, 0], [0.5, 0.5]], [[0, 1], [0.5, 0.5]]) == pytest.approx(0.5)

    def test_group_mismatch(self):
        with pytest.raises(DimensionError):
            averaged_chi2_distance([[1, 0]], [[1, 0], [1, 0]])

    def test_matrix_matches_pairwise(self, two_class_twenty):
        D = averaged_chi2_matrix(two_class_twenty, two_class_twenty)
        for i in (0, 4, 13):
            for j in (1, 4, 19):
                ref = averaged_chi2_distance(two_class_twenty.sample(i), two_class_twenty.sample(j))
                assert D[i, j] == pytest.approx(ref, abs=1e-14)


class TestBuildGram:
    def test_chi2_diagonal_and_range(self, two_class_twenty):
        K = build_gram(two_class_twenty, two_class_twenty, "chi2_exp", 0.5).values
        assert np.all(np.diag(K) == 1.0)
        assert np.all((K > 0) & (K <= 1))
        assert np.abs(K - K.T).max() <= 1e-12

    def test_linear_one_hot(self):
        A = one_group(np.eye(3))
        assert np.array_equal(build_gram(A, A, "linear").values, np.eye(3))

    def test_chi2_pair(self):
        A = one_group([[1, 0]])
        B = one_group([[0, 1]])
        assert build_gram(A, B, "chi2_exp", 1.0).values[0, 0] == pytest.approx(np.exp(-1), abs=1e-15)

    @pytest.mark.parametrize("bw", [0.0, -1.0, None])
    def test_bad_bandwidth(self, two_class_twenty, bw):
        with pytest.raises(ParameterError):
            build_gram(two_class_twenty, two_class_twenty, "chi2_exp", bw)

    def test_unknown_kernel(self, two_class_twenty):
        with pytest.raises(ParameterError):
            build_gram(two_class_twenty, two_class_twenty, "rbf", 1.0)

    def test_transpose(self, small_synth):
        from enprolab.data import restrict

        A = restrict(small_synth, range(0, 40))
        B = restrict(small_synth, range(40, 90))
        for kid in ("linear", "chi2_exp"):
            ab = build_gram(A, B, kid, 0.7).values
            ba = build_gram(B, A, kid, 0.7).values
            assert np.abs(ab - ba.T).max() <= 1e-12

    def test_row_blocks_bit_identical(self, small_synth):
        from enprolab.data import restrict

        full = build_gram(small_synth, small_synth, "chi2_exp", 0.4).values
        top = build_gram(restrict(small_synth, range(45)), small_synth, "chi2_exp", 0.4).values
        assert np.array_equal(full[:45], top)

    @settings(max_examples=40, deadline=None)
    @given(st.integers(2, 6), st.integers(0, 2**31), st.floats(0.05, 5))
    def test_psd(self, n, seed, bw):
        rng = np.random.default_rng(seed)
        A = one_group(rng.dirichlet(np.ones(6), size=n))
        K = build_gram(A, A, "chi2_exp", bw).values
        assert np.linalg.eigvalsh(K).min() >= -1e-8

    def test_csv(self, tmp_path):
        A = one_group([[1, 0], [0, 1]])
        write_gram_csv(build_gram(A, A, "linear"), tmp_path / "g.csv")
        assert (tmp_path / "g.csv").read_text().splitlines()[:2] == ["i,j,value", "0,0,1.0"]


class TestBandwidth:
    def test_identical_fallback(self):
        assert mean_distance_bandwidth(one_group([[0.5, 0.5], [0.5, 0.5]])) == 1.0

    def test_single_pair(self):
        assert mean_distance_bandwidth(one_group([[1, 0], [0, 1]])) == pytest.approx(1.0)

    def test_mean_of_listed_distances(self, monkeypatch):
        import enprolab.kernels as k

        D = np.array([[0, 1, 1], [1, 0, 4], [1, 4, 0]], dtype=float)
        monkeypatch.setattr(k, "averaged_chi2_matrix", lambda *a, **kw: D)
        assert k.mean_distance_bandwidth(one_group(np.ones((3, 2)))) == pytest.approx(2.0)

    def test_too_few(self):
        with pytest.raises(InsufficientDataError):
            mean_distance_bandwidth(one_group([[1, 0]]))
