import math

import numpy as np
import pytest

from eraseg import autodiff as ad
from eraseg.autodiff import Tensor
from eraseg.lexicon import V_B, V_E, V_S, Candidate
from eraseg.memory import aggregate, attend, init_memory_params, read_cell

RNG = np.random.default_rng(20240813)


def random_setup(n_words=6, d_a=4, m=3):
    keys = Tensor(RNG.normal(size=(n_words, d_a)))
    values = Tensor(RNG.normal(size=(4, d_a)))
    h = Tensor(RNG.normal(size=(1, d_a)))
    cands = [
        Candidate(int(RNG.integers(0, n_words)), int(RNG.integers(0, 4))) for _ in range(m)
    ]
    return h, cands, keys, values


class TestInit:
    def test_shapes_per_era(self):
        p = init_memory_params(np.random.default_rng(0), [5, 9], d_a=6)
        assert p.n_eras == 2
        assert p.key_tables[0].shape == (5, 6)
        assert p.key_tables[1].shape == (9, 6)
        assert p.value_table.shape == (4, 6)

    def test_empty_lexicon_rejected(self):
        with pytest.raises(ValueError, match="nonempty"):
            init_memory_params(np.random.default_rng(0), [5, 0], d_a=6)

    def test_names_unique(self):
        p = init_memory_params(np.random.default_rng(0), [3, 3, 3], d_a=4)
        names = [n for n, _ in p.named_tensors()]
        assert len(names) == len(set(names)) == 4


class TestAttend:
    def test_equal_keys_split_evenly(self):
        keys = Tensor(np.tile([1.0, 0.0], (2, 1)))
        h = Tensor([[3.0, -1.0]])
        p = attend(h, [Candidate(0, V_S), Candidate(1, V_S)], keys)
        np.testing.assert_allclose(p.value, [[0.5, 0.5]], atol=1e-12)

    def test_analytic_two_key_case(self):
        # Dot products 0 and ln 3 give probabilities 1/4 and 3/4.
        keys = Tensor([[0.0, 0.0], [math.log(3.0), 0.0]])
        h = Tensor([[1.0, 0.0]])
        p = attend(h, [Candidate(0, V_S), Candidate(1, V_S)], keys)
        np.testing.assert_allclose(p.value, [[0.25, 0.75]], atol=1e-12)

    def test_single_candidate_gets_everything(self):
        h, _, keys, _ = random_setup()
        p = attend(h, [Candidate(2, V_B)], keys)
        np.testing.assert_allclose(p.value, [[1.0]], atol=1e-15)

    def test_sums_to_one(self):
        for _ in range(10):
            h, cands, keys, _ = random_setup(m=4)
            p = attend(h, cands, keys)
            assert abs(p.value.sum() - 1.0) < 1e-12

    def test_empty_rejected(self):
        h, _, keys, _ = random_setup()
        with pytest.raises(ValueError, match="at least one candidate"):
            attend(h, [], keys)


class TestAggregate:
    def test_single_candidate_returns_its_value_row(self):
        _, _, _, values = random_setup()
        out = aggregate(Tensor([[1.0]]), [Candidate(3, V_S)], values)
        np.testing.assert_array_equal(out.value, values.value[V_S : V_S + 1, :])

    def test_two_class_weighted_sum(self):
        _, _, _, values = random_setup()
        p = Tensor([[0.25, 0.75]])
        out = aggregate(p, [Candidate(0, V_B), Candidate(1, V_E)], values)
        want = 0.25 * values.value[V_B] + 0.75 * values.value[V_E]
        np.testing.assert_allclose(out.value[0], want, atol=1e-12)

    def test_empty_candidates_give_zero_vector(self):
        _, _, _, values = random_setup(d_a=5)
        out = aggregate(Tensor(np.zeros((1, 0))), [], values)
        np.testing.assert_array_equal(out.value, np.zeros((1, 5)))

    def test_weight_count_mismatch_rejected(self):
        _, _, _, values = random_setup()
        with pytest.raises(ValueError, match="do not match"):
            aggregate(Tensor([[0.5, 0.5]]), [Candidate(0, V_S)], values)

    def test_matches_loop_oracle(self):
        for _ in range(20):
            h, cands, keys, values = random_setup(m=4)
            p = attend(h, cands, keys)
            out = aggregate(p, cands, values)
            want = np.zeros(values.shape[1])
            for j, c in enumerate(cands):
                want += p.value[0, j] * values.value[c.value_class]
            np.testing.assert_allclose(out.value[0], want, atol=1e-12)

    def test_output_in_convex_hull_of_used_values(self):
        for _ in range(20):
            h, cands, keys, values = random_setup(m=5)
            out = read_cell(h, cands, keys, values).value[0]
            used = values.value[[c.value_class for c in cands], :]
            assert np.all(out >= used.min(axis=0) - 1e-12)
            assert np.all(out <= used.max(axis=0) + 1e-12)


class TestReadCell:
    def test_empty_set_is_zero_vector(self):
        h, _, keys, values = random_setup(d_a=4)
        out = read_cell(h, [], keys, values)
        np.testing.assert_array_equal(out.value, np.zeros((1, 4)))

    def test_gradients_reach_keys_values_and_state(self):
        h, cands, keys, values = random_setup(m=3)
        w = Tensor(RNG.normal(size=(1, keys.shape[1])))

        def build():
            return ad.sum_all(ad.mul(read_cell(h, cands, keys, values), w))

        assert ad.grad_check(build, [h, keys, values]) < 1e-4
