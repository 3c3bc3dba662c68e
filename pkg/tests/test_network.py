import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from ccg.errors import NoPathError, ParseError, ValidationError
from ccg.network import (
    Arc,
    DirectedNetwork,
    Network,
    incidence_to_strategy,
    lift,
    load_network,
    normalize_freeflow,
    parse_tntp,
    shortest_path_lmo,
    strategy_to_incidence,
    symmetrize,
)

from conftest import DATA, random_small_network


class TestParse:
    def test_single_row(self):
        text = "<NUMBER OF NODES> 2\n<END OF METADATA>\n1 2 100 1 5.0 0 0 0 0 1 ;\n"
        net = parse_tntp(text)
        assert net.node_count == 2
        assert len(net.arcs) == 1
        arc = net.arcs[0]
        assert (arc.tail, arc.head, arc.free_flow_time) == (1, 2, 5.0)
        assert arc.raw_attributes["capacity"] == 100.0

    def test_metadata_and_comments_only(self):
        text = "<NUMBER OF NODES> 4\n~ a comment line\n\n<END OF METADATA>\n"
        net = parse_tntp(text)
        assert net.node_count == 4
        assert net.arcs == ()

    def test_two_rows_distinct_times(self):
        text = (
            "<NUMBER OF NODES> 2\n"
            "1 2 0 0 5.0 0 0 0 0 1 ;\n"
            "2 1 0 0 3.0 0 0 0 0 1 ;\n"
        )
        net = parse_tntp(text)
        assert [a.free_flow_time for a in net.arcs] == [5.0, 3.0]

    def test_malformed_header_has_line_number(self):
        with pytest.raises(ParseError, match="line 2"):
            parse_tntp("<NUMBER OF NODES> 2\n<BROKEN\n")

    def test_short_row_rejected(self):
        with pytest.raises(ParseError, match="line 2"):
            parse_tntp("<NUMBER OF NODES> 2\n1 2 ;\n")

    def test_node_id_beyond_count(self):
        with pytest.raises(ValidationError, match="exceeds"):
            parse_tntp("<NUMBER OF NODES> 2\n1 3 1 1 1 ;\n")

    def test_missing_node_count(self):
        with pytest.raises(ParseError, match="NUMBER OF NODES"):
            parse_tntp("<NUMBER OF ZONES> 2\n")

    def test_file_fixture_parses(self):
        net = parse_tntp((DATA / "sixnode.tntp").read_text())
        assert net.node_count == 6
        assert len(net.arcs) == 14


class TestSymmetrize:
    def test_min_merge_rule(self):
        net = DirectedNetwork(2, (Arc(1, 2, 5.0), Arc(2, 1, 3.0)))
        sym = symmetrize(net)
        assert sym.edges == ((1, 2),)
        assert sym.d[0] == 3.0

    def test_one_direction_only(self):
        sym = symmetrize(DirectedNetwork(2, (Arc(1, 2, 5.0),)))
        assert sym.edges == ((1, 2),)
        assert sym.d[0] == 5.0

    def test_component_tiebreak_smallest_node(self):
        net = DirectedNetwork(4, (Arc(1, 2, 1.0), Arc(3, 4, 1.0)))
        sym = symmetrize(net)
        assert sym.edges == ((1, 2),)

    def test_largest_component_kept(self):
        net = DirectedNetwork(
            5, (Arc(4, 5, 1.0), Arc(1, 2, 1.0), Arc(2, 3, 1.0))
        )
        assert symmetrize(net).edges == ((1, 2), (2, 3))

    def test_empty_rejected(self):
        with pytest.raises(ValidationError):
            symmetrize(DirectedNetwork(2, ()))

    def test_self_loops_dropped_with_warning(self):
        net = DirectedNetwork(2, (Arc(1, 1, 1.0), Arc(1, 2, 2.0)))
        with pytest.warns(UserWarning, match="self-loop"):
            sym = symmetrize(net)
        assert sym.edges == ((1, 2),)

    def test_idempotent_through_lift(self):
        net = parse_tntp((DATA / "sixnode.tntp").read_text())
        once = symmetrize(net)
        twice = symmetrize(lift(once))
        assert once.edges == twice.edges
        assert np.array_equal(once.d, twice.d)


class TestNormalize:
    def test_scales_to_unit_max(self):
        net = Network(2, ((1, 2),), np.array([5.0]))
        net2 = Network(3, ((1, 2), (1, 3)), np.array([5.0, 3.0]))
        assert normalize_freeflow(net).d[0] == 1.0
        out = normalize_freeflow(net2)
        assert np.allclose(out.d, [1.0, 0.6])

    def test_identity_when_already_unit(self):
        net = Network(2, ((1, 2),), np.array([1.0]))
        assert normalize_freeflow(net).d[0] == 1.0

    def test_all_zero_warns(self):
        net = Network(3, ((1, 2), (2, 3)), np.zeros(2))
        with pytest.warns(UserWarning, match="zero"):
            out = normalize_freeflow(net)
        assert np.array_equal(out.d, np.zeros(2))

    def test_pipeline_deterministic(self):
        a = load_network(DATA / "sixnode.tntp")
        b = load_network(DATA / "sixnode.tntp")
        assert a.edges == b.edges
        assert np.array_equal(a.d, b.d)
        assert a.d.max() == 1.0

    def test_coords_loaded(self):
        net = load_network(DATA / "sixnode.tntp", coords_path=DATA / "sixnode_coords.txt")
        assert net.coordinates[6] == (3.0, 0.0)


class TestShortestPath:
    def test_triangle_derived(self, toy_net):
        # enumerating both s-t paths: {e0,e2} costs 2, {e1} costs 3
        path = shortest_path_lmo(toy_net, np.array([1.0, 3.0, 1.0]), 1, 3)
        assert path == (0, 2)

    def test_zero_cost_edge(self, toy_net):
        path = shortest_path_lmo(toy_net, np.array([1.0, 0.0, 1.0]), 1, 3)
        assert path == (1,)

    def test_equal_cost_tiebreak_smaller_edges(self, toy_net):
        # both routes cost 2: direct edge wins through the deterministic rule
        path = shortest_path_lmo(toy_net, np.array([1.0, 2.0, 1.0]), 1, 3)
        assert path == (1,)

    def test_negative_weight_rejected(self, toy_net):
        with pytest.raises(ValidationError):
            shortest_path_lmo(toy_net, np.array([1.0, -0.1, 1.0]), 1, 3)

    def test_unreachable(self):
        net = Network(4, ((1, 2), (3, 4)), np.ones(2))
        with pytest.raises(NoPathError):
            shortest_path_lmo(net, np.ones(2), 1, 3)

    def test_matches_bruteforce_on_random_graphs(self):
        rng = np.random.default_rng(2024)
        from conftest import family_oracle
        from ccg.network import FamilySpec

        checked = 0
        while checked < 12:
            net = random_small_network(rng)
            nodes = sorted(net.nodes)
            if len(nodes) < 2:
                continue
            s, t = nodes[0], nodes[-1]
            paths = family_oracle(net, FamilySpec.st_paths(s, t))
            if not paths:
                continue
            checked += 1
            for _ in range(100):
                w = rng.random(net.n)
                got = shortest_path_lmo(net, w, s, t)
                best = min(w[list(p)].sum() for p in paths)
                assert w[list(got)].sum() == pytest.approx(best, abs=1e-12)


class TestStrategyRoundTrip:
    @given(st.sets(st.integers(min_value=0, max_value=19)))
    @settings(max_examples=60, deadline=None)
    def test_incidence_roundtrip(self, idx):
        strat = tuple(sorted(idx))
        vec = strategy_to_incidence(strat, 20)
        assert incidence_to_strategy(vec) == strat
