import numpy as np
import pytest

from ccg.errors import CapExceededError, EmptyFamilyError, ValidationError
from ccg.network import FamilySpec, Network
from ccg.zdd import (
    Zdd,
    build_family,
    check_structure,
    count,
    count_by_length,
    enumerate_strategies,
    exact_length_counts,
    from_strategies,
    load_zdd,
    min_cost,
    save_zdd,
    terminal_zdd,
)

from conftest import family_oracle, grid_network, random_small_network, toy_triangle


@pytest.fixture(scope="module")
def toy_zdd():
    return build_family(toy_triangle(), FamilySpec.st_paths(1, 3))


class TestBuild:
    def test_toy_matches_published_shape(self, toy_zdd):
        # two s-t paths, three decision nodes, one per edge
        assert toy_zdd.num_internal == 3
        assert enumerate_strategies(toy_zdd) == {(0, 2), (1,)}

    def test_single_edge_family(self):
        net = Network(2, ((1, 2),), np.ones(1))
        z = build_family(net, FamilySpec.st_paths(1, 2))
        assert z.num_internal == 1
        assert int(z.hi[z.root]) == 1
        assert enumerate_strategies(z) == {(0,)}

    def test_four_cycle_steiner(self):
        net = Network(4, ((1, 2), (1, 4), (2, 3), (3, 4)), np.ones(4))
        z = build_family(net, FamilySpec.steiner_cycles((1, 3)))
        assert enumerate_strategies(z) == {(0, 1, 2, 3)}

    def test_infeasible_gives_reject_root(self):
        net = Network(4, ((1, 2), (3, 4)), np.ones(2))
        z = build_family(net, FamilySpec.st_paths(1, 3))
        assert z.root == 0
        assert count(z).exact == 0

    def test_equal_endpoints_rejected(self):
        with pytest.raises(ValidationError):
            FamilySpec.st_paths(1, 1)

    def test_missing_endpoint_rejected(self, toy_zdd):
        with pytest.raises(ValidationError):
            build_family(toy_triangle(), FamilySpec.st_paths(1, 9))

    def test_canonicity_recompilation_identical(self):
        net = grid_network(3, 3)
        a = build_family(net, FamilySpec.st_paths(1, 9))
        b = build_family(net, FamilySpec.st_paths(1, 9))
        assert np.array_equal(a.label, b.label)
        assert np.array_equal(a.lo, b.lo)
        assert np.array_equal(a.hi, b.hi)
        assert a.root == b.root

    @pytest.mark.parametrize("kind", ["st_paths", "hamiltonian_st_paths", "steiner_cycles"])
    def test_matches_subset_oracle(self, kind):
        rng = np.random.default_rng(hash(kind) % 2**32)
        done = 0
        while done < 8:
            net = random_small_network(rng, max_edges=10)
            nodes = sorted(net.nodes)
            if len(nodes) < 3:
                continue
            if kind == "steiner_cycles":
                spec = FamilySpec.steiner_cycles(tuple(nodes[:2]))
            else:
                spec = FamilySpec(kind, s=nodes[0], t=nodes[-1])
            z = build_family(net, spec)
            check_structure(z)
            assert enumerate_strategies(z) == family_oracle(net, spec)
            done += 1

    def test_custom_var_order(self):
        net = toy_triangle()
        z = build_family(net, FamilySpec.st_paths(1, 3), var_order=(2, 0, 1))
        check_structure(z)
        assert enumerate_strategies(z) == {(0, 2), (1,)}


class TestCountsAndCosts:
    def test_count_toy(self, toy_zdd):
        res = count(toy_zdd)
        assert res.exact == 2
        assert res.log == pytest.approx(np.log(2), rel=1e-12)

    def test_count_terminals(self):
        assert count(terminal_zdd(3, accept=False)).exact == 0
        assert count(terminal_zdd(3, accept=True)).exact == 1
        assert enumerate_strategies(terminal_zdd(3, accept=True)) == {()}
        assert enumerate_strategies(terminal_zdd(3, accept=False)) == set()

    def test_powerset_family(self):
        z = from_strategies(3, [set(s) for s in
                                [(), (0,), (1,), (2,), (0, 1), (0, 2), (1, 2), (0, 1, 2)]])
        assert count(z).exact == 8
        assert len(enumerate_strategies(z)) == 8

    def test_cap_enforced(self, toy_zdd):
        with pytest.raises(CapExceededError):
            enumerate_strategies(toy_zdd, cap=1)

    def test_min_cost_toy_derived(self, toy_zdd):
        # weights in edge-index order (s-u, s-t, u-t)
        strat, cost = min_cost(toy_zdd, np.array([0.4, 1.0, 0.5]))
        assert strat == (0, 2) and cost == pytest.approx(0.9)
        strat, cost = min_cost(toy_zdd, np.ones(3))
        assert strat == (1,) and cost == pytest.approx(1.0)

    def test_min_cost_zero_weights(self, toy_zdd):
        _, cost = min_cost(toy_zdd, np.zeros(3))
        assert cost == 0.0

    def test_min_cost_empty_family(self):
        with pytest.raises(EmptyFamilyError):
            min_cost(terminal_zdd(2, accept=False), np.ones(2))

    def test_min_cost_matches_enumeration_with_negatives(self):
        rng = np.random.default_rng(99)
        net = grid_network(3, 3)
        z = build_family(net, FamilySpec.st_paths(1, 9))
        fam = sorted(enumerate_strategies(z))
        for _ in range(200):
            w = rng.normal(size=net.n)
            strat, cost = min_cost(z, w)
            best = min(w[list(s)].sum() for s in fam)
            assert cost == pytest.approx(best, abs=1e-12)
            assert w[list(strat)].sum() == pytest.approx(best, abs=1e-12)

    def test_count_matches_enumeration_random(self):
        rng = np.random.default_rng(5)
        for _ in range(10):
            net = random_small_network(rng)
            nodes = sorted(net.nodes)
            z = build_family(net, FamilySpec.st_paths(nodes[0], nodes[-1]))
            assert count(z).exact == len(enumerate_strategies(z))


class TestLengthCounts:
    def test_toy_lengths(self, toy_zdd):
        table = count_by_length(toy_zdd)
        assert table.feasible_lengths == (1, 2)
        assert exact_length_counts(toy_zdd) == {1: 1, 2: 1}

    def test_accept_root_table(self):
        table = count_by_length(terminal_zdd(2, accept=True))
        assert table.feasible_lengths == (0,)

    def test_hamiltonian_single_length(self):
        net = grid_network(2, 3)
        z = build_family(net, FamilySpec.hamiltonian_st_paths(1, 6))
        lengths = count_by_length(z).feasible_lengths
        assert lengths == (len(net.nodes) - 1,)

    def test_recursion_invariant_log_domain(self):
        net = grid_network(3, 3)
        z = build_family(net, FamilySpec.st_paths(1, 9))
        table = count_by_length(z).log_table
        for v in range(2, len(z.lo)):
            for r in range(table.shape[1]):
                expect = np.logaddexp(
                    table[z.lo[v], r],
                    table[z.hi[v], r - 1] if r > 0 else -np.inf,
                )
                got = table[v, r]
                if np.isinf(expect):
                    assert np.isinf(got)
                else:
                    assert got == pytest.approx(expect, rel=1e-9)

    def test_length_sum_equals_total(self):
        net = grid_network(3, 3)
        z = build_family(net, FamilySpec.st_paths(1, 9))
        exact = exact_length_counts(z)
        assert sum(exact.values()) == count(z).exact
        table = count_by_length(z)
        total_log = table.log_table[z.root]
        finite = total_log[np.isfinite(total_log)]
        lse = finite.max() + np.log(np.exp(finite - finite.max()).sum())
        assert lse == pytest.approx(count(z).log, rel=1e-9)


class TestCacheFile:
    def test_roundtrip(self, toy_zdd, tmp_path):
        path = tmp_path / "toy.zdd1"
        save_zdd(toy_zdd, path)
        back = load_zdd(path)
        assert np.array_equal(back.label, toy_zdd.label)
        assert np.array_equal(back.lo, toy_zdd.lo)
        assert np.array_equal(back.hi, toy_zdd.hi)
        assert back.root == toy_zdd.root
        assert back.var_order == toy_zdd.var_order
        assert path.read_bytes()[:4] == b"ZDD1"

    def test_bad_magic_rejected(self, tmp_path):
        path = tmp_path / "junk.zdd1"
        path.write_bytes(b"NOPE" + b"\x00" * 16)
        with pytest.raises(ValidationError, match="magic"):
            load_zdd(path)

    def test_structure_checked_on_load(self, toy_zdd):
        check_structure(toy_zdd)
        bad = Zdd(
            n=2,
            label=np.array([-1, -1, 0], dtype=np.int64),
            lo=np.array([0, 0, 1], dtype=np.int64),
            hi=np.array([0, 0, 0], dtype=np.int64),   # hi = reject: not reduced
            root=2,
            var_order=(0, 1),
        )
        with pytest.raises(ValidationError, match="hi child"):
            check_structure(bad)
