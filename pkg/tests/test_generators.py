import numpy as np
import pytest

from milpscope.generators import (
    ConfigError,
    GenConfig,
    gen_comb_auction,
    gen_gisp,
    gen_mixed,
    gen_set_covering,
    family_of_instance,
    generate,
)
from milpscope.model import instance_to_doc, validate
from milpscope._ioutil import canonical_dumps

from _oracles import brute_force_binary_milp


class TestSetCovering:
    def test_paper_scale_shape(self):
        inst = gen_set_covering(750, 1000, 0.05, seed=3)
        assert inst.num_vars == 1000
        assert inst.num_cons == 750
        assert validate(inst) == []

    def test_every_row_covered_twice_and_every_column_used(self):
        inst = gen_set_covering(40, 80, 0.04, seed=11)
        counts = np.zeros(80, dtype=int)
        for i in range(inst.num_cons):
            idx, coef = inst.row(i)
            assert len(idx) >= 2
            assert np.all(coef == 1.0)
            counts[idx] += 1
        assert np.all(counts >= 1)

    def test_costs_are_integers_in_range(self):
        inst = gen_set_covering(10, 20, 0.2, seed=5)
        assert np.all(inst.obj == np.round(inst.obj))
        assert np.all((inst.obj >= 1) & (inst.obj <= 100))

    def test_determinism(self):
        a = gen_set_covering(20, 40, 0.1, seed=77)
        b = gen_set_covering(20, 40, 0.1, seed=77)
        assert canonical_dumps(instance_to_doc(a)) == canonical_dumps(instance_to_doc(b))

    def test_single_column_rejected(self):
        with pytest.raises(ConfigError):
            gen_set_covering(10, 1, 0.5, seed=1)

    def test_bad_density_rejected(self):
        with pytest.raises(ConfigError):
            gen_set_covering(10, 10, 1.5, seed=1)

    def test_tiny_instance_matches_brute_force_structure(self):
        inst = gen_set_covering(2, 2, 0.9, seed=4)
        z, x = brute_force_binary_milp(inst)
        assert z is not None  # double coverage guarantees feasibility
        assert inst.is_feasible(x)


class TestCombAuction:
    def test_paper_scale_shape(self):
        inst = gen_comb_auction(200, 1000, seed=8)
        assert inst.num_vars == 1000
        assert inst.num_cons == 200
        assert inst.maximize_origin is True
        assert validate(inst) == []

    def test_prices_positive_and_rows_are_packing(self):
        inst = gen_comb_auction(10, 30, seed=2)
        assert np.all(inst.obj < 0.0)  # negated positive prices
        assert np.all(inst.rhs == -1.0)
        for i in range(inst.num_cons):
            _, coef = inst.row(i)
            assert np.all(coef == -1.0)

    def test_zero_vector_is_feasible(self):
        inst = gen_comb_auction(6, 10, seed=13)
        assert inst.is_feasible(np.zeros(inst.num_vars))

    def test_brute_force_oracle_on_tiny_instance(self):
        inst = gen_comb_auction(3, 4, seed=21)
        z, x = brute_force_binary_milp(inst)
        assert z is not None and z <= 0.0
        assert inst.is_feasible(x)

    def test_determinism(self):
        a = gen_comb_auction(5, 12, seed=3)
        b = gen_comb_auction(5, 12, seed=3)
        assert canonical_dumps(instance_to_doc(a)) == canonical_dumps(instance_to_doc(b))


class TestGisp:
    def test_paper_scale_shape(self):
        inst = gen_gisp(80, 0.6, 0.75, seed=6)
        assert inst.maximize_origin is True
        assert validate(inst) == []
        # n = nodes + removable edges, m = total edges
        assert inst.num_vars >= 80
        assert inst.num_cons >= inst.num_vars - 80

    def test_removable_fraction_within_three_sigma(self):
        # ~1770 candidate pairs at p=0.6 gives >1000 edges
        inst = gen_gisp(60, 0.6, 0.75, seed=19)
        nodes = 60
        removable = inst.num_vars - nodes
        edges = inst.num_cons
        assert edges > 1000
        sigma = (edges * 0.75 * 0.25) ** 0.5
        assert abs(removable - 0.75 * edges) <= 3 * sigma

    def test_row_structure(self):
        inst = gen_gisp(8, 0.8, 0.5, seed=4)
        nodes = 8
        for i in range(inst.num_cons):
            idx, coef = inst.row(i)
            node_terms = [c for j, c in zip(idx, coef) if j < nodes]
            edge_terms = [c for j, c in zip(idx, coef) if j >= nodes]
            assert node_terms == [-1.0, -1.0]
            assert edge_terms in ([], [1.0])

    def test_brute_force_oracle_on_tiny_instance(self):
        inst = gen_gisp(4, 0.99, 0.5, seed=9)
        assert inst.num_vars <= 10
        z, x = brute_force_binary_milp(inst)
        assert z is not None
        assert inst.is_feasible(x)

    def test_determinism(self):
        a = gen_gisp(10, 0.5, 0.5, seed=31)
        b = gen_gisp(10, 0.5, 0.5, seed=31)
        assert canonical_dumps(instance_to_doc(a)) == canonical_dumps(instance_to_doc(b))


class TestMixed:
    PARAMS = {
        "set_covering": {"rows": 6, "cols": 12, "density": 0.3},
        "comb_auction": {"items": 4, "bids": 8},
        "gisp": {"graph_nodes": 5, "edge_prob": 0.5, "alpha": 0.5},
    }

    def test_equal_proportions(self):
        out = gen_mixed(6, self.PARAMS, seed=1)
        assert len(out) == 6
        fams = [family_of_instance(inst) for inst in out]
        assert sorted(fams).count("set_covering") == 2
        assert sorted(fams).count("comb_auction") == 2
        assert sorted(fams).count("gisp") == 2

    def test_count_not_divisible_by_three_raises(self):
        with pytest.raises(ConfigError):
            gen_mixed(7, self.PARAMS, seed=1)

    def test_seed_repeat_same_order(self):
        a = gen_mixed(9, self.PARAMS, seed=5)
        b = gen_mixed(9, self.PARAMS, seed=5)
        assert [i.name for i in a] == [i.name for i in b]
        c = gen_mixed(9, self.PARAMS, seed=6)
        assert [i.name for i in a] != [i.name for i in c]


def test_all_generators_validate_clean_over_many_seeds():
    for seed in range(100):
        cfgs = [
            GenConfig("set_covering", {"rows": 8, "cols": 16, "density": 0.25}, seed),
            GenConfig("comb_auction", {"items": 5, "bids": 10}, seed),
            GenConfig("gisp", {"graph_nodes": 6, "edge_prob": 0.5, "alpha": 0.5}, seed),
        ]
        for cfg in cfgs:
            inst = generate(cfg)
            assert validate(inst) == [], f"{cfg.family} seed {seed}"


def test_unknown_family_rejected():
    with pytest.raises(ConfigError):
        GenConfig("knapsack", {}, 0)
