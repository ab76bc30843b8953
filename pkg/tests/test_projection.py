import numpy as np
import pytest

from enprolab.data import DescriptorSet, make_split, restrict
from enprolab.errors import DimensionError, LeakageError, ParameterError
from enprolab.kernels import averaged_chi2_matrix
from enprolab.linear import LinearModel
from enprolab.projection import (
    ProjectionEnsemble,
    PseudoHypothesis,
    farthest_first,
    fit_ensemble,
    load_ensemble,
    project,
    sample_exotic_hypothesis,
    sample_uniform_hypothesis,
    save_ensemble,
)


def proxies(pos, scale=1.0):
    p = np.asarray(pos, dtype=float) / scale
    return DescriptorSet((np.column_stack([p, 1 - p]),), np.zeros(len(p), dtype=int), 1)


def zero_ensemble(T, c, dim, sigmoid):
    hyps = tuple(PseudoHypothesis(c, tuple((k, k) for k in range(c)), "uniform") for _ in range(T))
    banks = tuple(tuple(LinearModel.zero(dim) for _ in range(c)) for _ in range(T))
    return ProjectionEnsemble(hyps, banks, sigmoid, dim, {})


class TestExoticSampler:
    def test_farthest_first_on_line(self):
        data = proxies([0, 1, 10], scale=10)
        D = averaged_chi2_matrix(data, data)
        assert sorted(farthest_first(D, 2, 0)) == [0, 2]

    def test_seed_draw_reaching_position_zero(self):
        data = proxies([0, 1, 10], scale=10)
        for seed in range(50):
            h = sample_exotic_hypothesis(data, 2, 0, seed)
            if h.assignments[0][0] == 0:
                assert sorted(h.sample_ids.tolist()) == [0, 2]
                return
        pytest.fail("no seed drew position 0 first")

    def test_tight_pairs(self):
        data = proxies([0.0, 0.02, 0.98, 1.0])
        for seed in range(5):
            h = sample_exotic_hypothesis(data, 2, 1, seed)
            groups = {frozenset(h.sample_ids[h.pseudo_labels == k].tolist()) for k in range(2)}
            assert groups == {frozenset({0, 1}), frozenset({2, 3})}

    def test_ids_from_view(self, small_synth):
        plan = make_split(small_synth, 2, 0.5, False, 0)
        view = restrict(small_synth, plan.train_ids())
        h = sample_exotic_hypothesis(view, 3, 4, 1)
        assert set(h.sample_ids.tolist()) <= set(plan.train_ids().tolist())
        assert not set(h.sample_ids.tolist()) & set(plan.test_ids.tolist())
        assert np.bincount(h.pseudo_labels).tolist() == [5, 5, 5]

    @pytest.mark.parametrize("c,m", [(1, 2), (4, 5)])
    def test_bad_params(self, c, m):
        with pytest.raises(ParameterError):
            sample_exotic_hypothesis(proxies(np.linspace(0, 1, 20)), c, m, 0)


class TestUniformSampler:
    def test_class_sizes(self, small_synth):
        h = sample_uniform_hypothesis(small_synth, 4, 6, 0)
        assert np.bincount(h.pseudo_labels).tolist() == [6, 6, 6, 6]
        assert len(set(h.sample_ids.tolist())) == 24

    def test_deterministic(self, small_synth):
        assert sample_uniform_hypothesis(small_synth, 3, 5, 9).assignments == \
            sample_uniform_hypothesis(small_synth, 3, 5, 9).assignments

    def test_distinct_seeds_differ(self, default_synth):
        draws = [sample_uniform_hypothesis(restrict(default_synth, range(100)), 3, 6, s).assignments
                 for s in range(5)]
        assert len(set(draws)) == 5

    def test_too_many(self, small_synth):
        with pytest.raises(ParameterError):
            sample_uniform_hypothesis(small_synth, 10, 10, 0)


class TestFitEnsemble:
    @pytest.mark.parametrize("T,c,K", [(1, 2, 2), (10, 5, 50)])
    def test_output_dim(self, small_synth, T, c, K):
        ens = fit_ensemble(small_synth, T=T, c=c, m=2, seed=0)
        assert ens.output_dim == K
        assert project(ens, small_synth).shape == (90, K)
        assert project(ens, small_synth.stacked()[0]).shape == (K,)

    @pytest.mark.parametrize("sampler", ["exotic", "uniform"])
    def test_refit_bit_identical(self, small_synth, sampler):
        probe = small_synth.stacked()[7]
        a = project(fit_ensemble(small_synth, T=5, sampler_id=sampler, seed=3), probe)
        b = project(fit_ensemble(small_synth, T=5, sampler_id=sampler, seed=3), probe)
        assert np.array_equal(a, b)

    def test_uniform_labels_same_count_as_exotic(self, small_synth):
        ens = fit_ensemble(small_synth, T=2, c=3, m=4, sampler_id="uniform")
        assert all(len(h.assignments) == 15 for h in ens.hypotheses)

    def test_sigmoid_range(self, small_synth):
        phi = project(fit_ensemble(small_synth, T=4, seed=1), small_synth)
        assert np.all((phi > 0) & (phi < 1))

    def test_forbidden_ids(self, small_synth):
        with pytest.raises(LeakageError, match="hypothesis 0"):
            fit_ensemble(small_synth, T=3, forbidden_ids=np.arange(90))

    def test_error_annotated(self):
        with pytest.raises(ParameterError, match="hypothesis 0"):
            fit_ensemble(proxies(np.linspace(0, 1, 8)), T=2, c=3, m=5)

    def test_zero_hypotheses(self, small_synth):
        with pytest.raises(ParameterError):
            fit_ensemble(small_synth, T=0)


class TestProject:
    def test_zero_models_sigmoid(self):
        assert np.array_equal(project(zero_ensemble(3, 2, 4, True), np.ones(4)), np.full(6, 0.5))

    def test_zero_models_raw(self):
        assert np.array_equal(project(zero_ensemble(3, 2, 4, False), np.ones(4)), np.zeros(6))

    def test_layout_mismatch(self):
        with pytest.raises(DimensionError):
            project(zero_ensemble(1, 2, 4, True), np.ones(5))

    def test_save_load(self, tmp_path, small_synth):
        ens = fit_ensemble(small_synth, T=3, c=2, m=3, use_sigmoid=False, seed=5)
        save_ensemble(ens, tmp_path / "ens")
        back = load_ensemble(tmp_path / "ens")
        assert np.array_equal(project(back, small_synth), project(ens, small_synth))
        assert back.params == ens.params
        assert [h.assignments for h in back.hypotheses] == [h.assignments for h in ens.hypotheses]
        assert sorted(p.name for p in (tmp_path / "ens").iterdir())[:2] == ["hypothesis_0000.csv", "hypothesis_0001.csv"]
