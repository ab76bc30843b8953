import numpy as np
import pytest

from enprolab.errors import ParameterError
from enprolab.kernels import averaged_chi2_matrix
from enprolab.synthetic import SynthSpec, generate


class TestGenerate:
    def test_simplex_rows(self, default_synth):
        for g in default_synth.groups:
            assert np.all(g >= 0)
            assert np.abs(g.sum(1) - 1).max() <= 1e-9

    def test_shapes_and_balance(self, default_synth):
        assert default_synth.group_dims == (16, 32)
        assert np.bincount(default_synth.labels).tolist() == [100] * 6

    def test_bit_identical(self):
        spec = SynthSpec(class_count=3, samples_per_class=10, seed=42)
        a, b = generate(spec), generate(spec)
        assert all(np.array_equal(x, y) for x, y in zip(a.groups, b.groups))
        assert np.array_equal(a.labels, b.labels)

    def test_seed_matters(self):
        a = generate(SynthSpec(class_count=2, samples_per_class=5, seed=0))
        b = generate(SynthSpec(class_count=2, samples_per_class=5, seed=1))
        assert not np.array_equal(a.groups[0], b.groups[0])

    def test_separable_triples(self):
        data = generate(SynthSpec(groups=((16, 1e-3), (32, 1e-3)), manifold_strength=1.0, seed=0))
        D = averaged_chi2_matrix(data, data)
        rng = np.random.default_rng(0)
        y = data.labels
        wins = 0
        n_triples = 5000
        for _ in range(n_triples):
            a = rng.integers(y.size)
            p = rng.choice(np.flatnonzero((y == y[a]) & (np.arange(y.size) != a)))
            q = rng.choice(np.flatnonzero(y != y[a]))
            wins += D[a, p] < D[a, q]
        assert wins / n_triples >= 0.95

    def test_zero_strength_still_valid(self):
        data = generate(SynthSpec(class_count=2, samples_per_class=4, manifold_strength=0.0))
        assert data.n_samples == 8

    @pytest.mark.parametrize(
        "kwargs",
        [
            {"samples_per_class": 3},
            {"class_count": 1},
            {"groups": ((1, 1.0),)},
            {"groups": ()},
            {"groups": ((4, -1.0),)},
            {"manifold_strength": 1.5},
        ],
    )
    def test_invalid_spec(self, kwargs):
        with pytest.raises(ParameterError):
            generate(SynthSpec(**kwargs))
