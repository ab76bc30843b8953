import numpy as np
import pytest

from enprolab.data import DescriptorSet
from enprolab.errors import DegenerateLabelsError, DimensionError, DomainError
from enprolab.kernel_svm import (
    KernelModel,
    dual_objective,
    kernel_decision,
    kernel_ovr_scores,
    train_kernel_binary,
    train_kernel_ovr,
)
from enprolab.kernels import build_gram, mean_distance_bandwidth
from enprolab.synthetic import SynthSpec, generate

from fixtures import kernel_problems
from oracles import svm_dual_enumeration

PROBLEMS = kernel_problems()


class TestTrainKernelBinary:
    def test_two_point_symmetry(self):
        m = train_kernel_binary(np.eye(2), np.array([1.0, -1.0]), C=1e3)
        assert m.alpha[0] == pytest.approx(m.alpha[1], abs=1e-12)
        assert abs(m.bias) < 1e-8
        assert kernel_decision(m, [1.0, 0.0]) > 0 > kernel_decision(m, [0.0, 1.0])

    @pytest.mark.parametrize("name,K,y,C", PROBLEMS, ids=[p[0] for p in PROBLEMS])
    def test_objective_matches_oracle(self, name, K, y, C):
        ref, _, _ = svm_dual_enumeration(K, y, C)
        m = train_kernel_binary(K, y, C)
        assert dual_objective(m.alpha, K, y) == pytest.approx(ref, abs=1e-4)

    @pytest.mark.parametrize("name,K,y,C", PROBLEMS, ids=[p[0] for p in PROBLEMS])
    def test_constraints(self, name, K, y, C):
        m = train_kernel_binary(K, y, C)
        assert np.all(m.alpha <= C) and np.all(m.alpha >= 0)
        assert abs(m.support_coefficients.sum()) < 1e-8

    def test_decisions_match_oracle(self):
        name, K, y, C = PROBLEMS[2]
        _, alpha, b = svm_dual_enumeration(K, y, C)
        m = train_kernel_binary(K, y, C)
        ref = K @ (alpha * y) + b
        assert np.abs(kernel_decision(m, K) - ref).max() < 1e-3

    @pytest.mark.parametrize("name,K,y,C", PROBLEMS, ids=[p[0] for p in PROBLEMS])
    def test_label_flip(self, name, K, y, C):
        a = train_kernel_binary(K, y, C)
        b = train_kernel_binary(K, -y, C)
        assert np.abs(a.support_coefficients + b.support_coefficients).max() < 1e-8
        assert abs(a.bias + b.bias) < 1e-8

    @pytest.mark.parametrize("name,K,y,C", PROBLEMS, ids=[p[0] for p in PROBLEMS])
    def test_monotone_objective(self, name, K, y, C):
        train_kernel_binary(K, y, C, tol=1e-8, debug=True)

    def test_indefinite_gram_terminates(self):
        K = np.array([[0.0, 1.0], [1.0, 0.0]])
        m = train_kernel_binary(K, np.array([1.0, -1.0]), C=1.0)
        assert np.all(np.isfinite(m.support_coefficients))

    def test_errors(self):
        with pytest.raises(DomainError):
            train_kernel_binary(np.array([[1.0, 0.2], [0.0, 1.0]]), np.array([1.0, -1.0]))
        with pytest.raises(DegenerateLabelsError):
            train_kernel_binary(np.eye(3), np.ones(3))
        with pytest.raises(DimensionError):
            train_kernel_binary(np.eye(3), np.array([1.0, -1.0]))


class TestDecision:
    def test_empty_support(self):
        m = KernelModel(np.zeros(3), 0.25, np.arange(3), "linear", None, 1.0)
        assert kernel_decision(m, [4.0, 5.0, 6.0]) == 0.25

    def test_length_mismatch(self):
        m = KernelModel(np.zeros(3), 0.0, np.arange(3), "linear", None, 1.0)
        with pytest.raises(DimensionError):
            kernel_decision(m, [1.0, 2.0])


@pytest.fixture(scope="module")
def clusters3():
    data = generate(SynthSpec(class_count=3, samples_per_class=10, groups=((8, 0.2),),
                              manifold_strength=1.0, class_spread=4.0, seed=2))
    K = build_gram(data, data, "chi2_exp", mean_distance_bandwidth(data))
    return K, data.labels


class TestOneVsRest:
    def test_two_class_mirror(self):
        _, K, y, C = PROBLEMS[3]
        lab = (y > 0).astype(int)
        m0, m1 = train_kernel_ovr(K, lab, 2, C)
        assert np.abs(m0.support_coefficients + m1.support_coefficients).max() < 1e-8
        assert abs(m0.bias + m1.bias) < 1e-8

    def test_training_accuracy(self, clusters3):
        K, y = clusters3
        models = train_kernel_ovr(K, y, 3, C=10.0)
        assert np.array_equal(kernel_ovr_scores(models, K).argmax(1), y)

    def test_permutation(self, clusters3):
        K, y = clusters3
        perm = np.array([1, 2, 0])
        a = train_kernel_ovr(K, y, 3)
        b = train_kernel_ovr(K, perm[y], 3)
        for c in range(3):
            assert np.array_equal(a[c].support_coefficients, b[perm[c]].support_coefficients)

    def test_metadata(self, clusters3):
        K, y = clusters3
        m = train_kernel_ovr(K, y, 3, training_ids=np.arange(100, 130))[0]
        assert m.kernel_id == "chi2_exp" and m.bandwidth == K.bandwidth
        assert m.training_ids[0] == 100
