import json
from itertools import combinations

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from tsiv.graph import (MixedGraph, NodeId, SeparationQuery, build_full_time_graph, check_conditions,
                        d_separated, d_separated_bruteforce, is_stabilized, marginalize, project_window,
                        remove_effect_edges)
from tsiv.var_model import VarParameters


def labelled_edges(g):
    lab = g.node_label
    directed = {(lab(u), lab(v)) for u, v in g.directed}
    bidirected = {frozenset((lab(u), lab(v))) for u, v in g.bidirected}
    return directed, bidirected


def bi(*pairs):
    return {frozenset(p) for p in pairs}


class TestFullTimeGraph:
    def test_pattern_of_instrumental_var(self, dense_scalar_model):
        g = build_full_time_graph(dense_scalar_model.params, (-3, 0))
        directed, bidirected = labelled_edges(g)
        assert not bidirected
        lag1 = {("I1", "I1"), ("I1", "X1"), ("H1", "H1"), ("H1", "X1"), ("H1", "Y1"), ("X1", "X1"),
                ("X1", "Y1"), ("Y1", "Y1"), ("Y1", "X1")}
        expected = set()
        for t in (-3, -2, -1):
            for a, b in lag1:
                expected.add((g.node_label(g.node(a, t)), g.node_label(g.node(b, t + 1))))
        assert directed == expected
        assert len(g.nodes) == 16

    def test_edgeless(self):
        g = build_full_time_graph(VarParameters(np.zeros((3, 3))), (0, 4))
        assert not g.directed and not g.bidirected and len(g.nodes) == 15

    def test_var2_single_coefficient(self):
        A = np.zeros((2, 2, 2))
        A[1, 1, 0] = 0.3
        g = build_full_time_graph(VarParameters(A, layout=None), (0, 5), labels=["X", "Y"])
        assert g.directed == {(NodeId(0, t), NodeId(1, t + 2)) for t in range(4)}

    def test_rejects_empty_window(self, dense_scalar_model):
        with pytest.raises(ValueError):
            build_full_time_graph(dense_scalar_model.params, (0, -1))


class TestMarginalize:
    def test_identity_projection(self, dense_scalar_model):
        g = build_full_time_graph(dense_scalar_model.params, (-3, 0))
        m = marginalize(g, g.nodes)
        assert m.directed == g.directed and not m.bidirected

    def test_unknown_nodes_rejected(self, dense_scalar_model):
        g = build_full_time_graph(dense_scalar_model.params, (-1, 0))
        with pytest.raises(ValueError):
            marginalize(g, [NodeId(0, 5)])

    def test_instrument_lag_window(self, dense_scalar_model):
        M = [("I1", -2), ("X1", -1), ("Y1", -1), ("Y1", 0)]
        directed, bidirected = labelled_edges(project_window(dense_scalar_model.params, M, 30))
        assert directed == {("I1_t-2", "X1_t-1"), ("X1_t-1", "Y1_t"), ("Y1_t-1", "Y1_t")}
        assert bidirected == bi(("I1_t-2", "X1_t-1"), ("I1_t-2", "Y1_t-1"), ("Y1_t-1", "Y1_t"),
                                ("X1_t-1", "Y1_t"), ("Y1_t-1", "X1_t-1"))

    def test_conditioning_window(self, dense_scalar_model):
        M = [("I1", -3), ("I1", -2), ("X1", -2), ("X1", -1), ("Y1", -1), ("Y1", 0)]
        directed, bidirected = labelled_edges(project_window(dense_scalar_model.params, M, 30))
        assert directed == {("I1_t-2", "X1_t-1"), ("I1_t-3", "I1_t-2"), ("I1_t-3", "X1_t-2"),
                            ("X1_t-1", "Y1_t"), ("X1_t-2", "X1_t-1"), ("X1_t-2", "Y1_t-1"),
                            ("Y1_t-1", "Y1_t")}
        # the last pair arises from I_{t-4} -> X_{t-3} -> Y_{t-2} -> X_{t-1} and I_{t-4} -> I_{t-3}
        assert bidirected == bi(("I1_t-3", "X1_t-2"), ("I1_t-3", "Y1_t-1"), ("X1_t-1", "X1_t-2"),
                                ("X1_t-1", "Y1_t"), ("X1_t-1", "Y1_t-1"), ("X1_t-2", "Y1_t"),
                                ("X1_t-2", "Y1_t-1"), ("Y1_t-1", "Y1_t"), ("I1_t-3", "X1_t-1"))

    def test_conditioning_window_without_feedback(self, scalar_layout):
        from tsiv.var_model import InstrumentalVar1
        m = InstrumentalVar1.from_blocks(scalar_layout, dict(
            II=0.5, HH=0.5, XI=0.5, XH=0.5, XX=0.3, YH=0.5, YX=0.4, YY=0.3))
        M = [("I1", -3), ("I1", -2), ("X1", -2), ("X1", -1), ("Y1", -1), ("Y1", 0)]
        _, bidirected = labelled_edges(project_window(m.params, M, 30))
        assert frozenset(("I1_t-3", "X1_t-1")) not in bidirected

    @pytest.mark.parametrize("n_lags", [1, 2, 3])
    def test_nuisance_window(self, dense_scalar_model, n_lags):
        inst = [("I1", -k) for k in range(2, n_lags + 2)]
        M = inst + [("X1", -1), ("Y1", -1), ("Y1", 0)]
        directed, bidirected = labelled_edges(project_window(dense_scalar_model.params, M, 30))
        last = f"I1_t-{n_lags + 1}"
        exp_dir = {("X1_t-1", "Y1_t"), ("Y1_t-1", "Y1_t"), ("I1_t-2", "X1_t-1")}
        for k in range(2, n_lags + 1):
            exp_dir.add((f"I1_t-{k + 1}", f"I1_t-{k}"))
        for k in range(3, n_lags + 2):
            exp_dir |= {(f"I1_t-{k}", "X1_t-1"), (f"I1_t-{k}", "Y1_t-1")}
        assert directed == exp_dir
        assert bidirected == bi(("Y1_t-1", "Y1_t"), ("X1_t-1", "Y1_t"), ("Y1_t-1", "X1_t-1"),
                                (last, "X1_t-1"), (last, "Y1_t-1"))

    @pytest.mark.parametrize("M", [
        [("I1", -2), ("X1", -1), ("Y1", -1), ("Y1", 0)],
        [("I1", -3), ("I1", -2), ("X1", -2), ("X1", -1), ("Y1", -1), ("Y1", 0)],
        [("I1", -4), ("I1", -3), ("I1", -2), ("X1", -1), ("Y1", -1), ("Y1", 0)],
    ])
    def test_stabilized(self, dense_scalar_model, M):
        assert is_stabilized(dense_scalar_model.params, M, history=30)

    def test_short_history_differs(self, dense_scalar_model):
        M = [("I1", -2), ("X1", -1), ("Y1", -1), ("Y1", 0)]
        assert not project_window(dense_scalar_model.params, M, 0).same_edges(
            project_window(dense_scalar_model.params, M, 30))


def random_dag(rng, n, p_edge):
    nodes = list(range(n))
    order = rng.permutation(n)
    directed = [(int(order[i]), int(order[j])) for i in range(n) for j in range(i + 1, n)
                if rng.random() < p_edge]
    return MixedGraph(frozenset(nodes), frozenset(directed))


def random_admg(rng, n, p_dir, p_bi):
    g = random_dag(rng, n, p_dir)
    bidir = [(i, j) for i, j in combinations(range(n), 2) if rng.random() < p_bi]
    return MixedGraph(g.nodes, g.directed, frozenset(bidir))


def random_query(rng, n):
    labels = rng.integers(0, 4, n)  # 0: A, 1: C, 2: B, 3: none
    A = [i for i in range(n) if labels[i] == 0] or [0]
    C = [i for i in range(n) if labels[i] == 1 and i not in A] or [n - 1 if n - 1 not in A else 1]
    B = [i for i in range(n) if labels[i] == 2 and i not in A and i not in C]
    return A, C, B


class TestSeparation:
    def test_isolated(self):
        g = MixedGraph(frozenset({"a", "b"}))
        assert d_separated(g, SeparationQuery({"a"}, {"b"}))

    def test_chain_fork_collider(self):
        chain = MixedGraph(frozenset("abc"), frozenset({("a", "b"), ("b", "c")}))
        assert not d_separated(chain, SeparationQuery({"a"}, {"c"}))
        assert d_separated(chain, SeparationQuery({"a"}, {"c"}, {"b"}))
        coll = MixedGraph(frozenset("abcd"), frozenset({("a", "b"), ("c", "b"), ("b", "d")}))
        assert d_separated(coll, SeparationQuery({"a"}, {"c"}))
        assert not d_separated(coll, SeparationQuery({"a"}, {"c"}, {"d"}))
        bid = MixedGraph(frozenset("abc"), frozenset({("a", "b")}), frozenset({("b", "c")}))
        assert d_separated(bid, SeparationQuery({"a"}, {"c"}))
        assert not d_separated(bid, SeparationQuery({"a"}, {"c"}, {"b"}))

    def test_disjointness_required(self):
        with pytest.raises(ValueError):
            SeparationQuery({"a"}, {"a"})
        with pytest.raises(ValueError):
            SeparationQuery({"a"}, {"b"}, removal="other")

    def test_conditioning_window_after_edge_removal(self, dense_scalar_model):
        M = [("I1", -3), ("I1", -2), ("X1", -2), ("X1", -1), ("Y1", -1), ("Y1", 0)]
        g = project_window(dense_scalar_model.params, M, 30)
        node = lambda name, t: NodeId(["I1", "H1", "X1", "Y1"].index(name), t)
        q = SeparationQuery({node("I1", -2)}, {node("Y1", 0)}, {node("I1", -3)}, removal="C1",
                            x_tilde={node("X1", -1)}, y={node("Y1", 0)})
        assert d_separated(g, q)
        q_no_removal = SeparationQuery({node("I1", -2)}, {node("Y1", 0)}, {node("I1", -3)})
        assert not d_separated(g, q_no_removal)

    def test_collider_path_on_full_graph(self, dense_scalar_model):
        g = build_full_time_graph(dense_scalar_model.params, (-30, 0))
        n = g.node
        q = SeparationQuery({n("I1", -2)}, {n("Y1", 0)}, {n("X1", -2), n("Y1", -1)}, removal="C1",
                            x_tilde={n("X1", -1)}, y={n("Y1", 0)})
        assert not d_separated(g, q)
        # the offending path enters X_{t-2} with arrowheads on both sides
        q2 = SeparationQuery({n("I1", -2)}, {n("Y1", 0)}, {n("I1", -3)}, removal="C1",
                             x_tilde={n("X1", -1)}, y={n("Y1", 0)})
        assert d_separated(g, q2)

    def test_agrees_with_bruteforce(self):
        rng = np.random.default_rng(12345)
        n_cases = 0
        disagreements = []
        while n_cases < 600:
            n = int(rng.integers(2, 11))
            g = random_admg(rng, n, rng.uniform(0.1, 0.5), rng.uniform(0.0, 0.3))
            A, C, B = random_query(rng, n)
            if set(A) & set(C):
                continue
            removal = [None, "C1", "C1prime"][int(rng.integers(0, 3))]
            kwargs = {}
            if removal:
                rest = [i for i in range(n) if i not in C]
                kwargs = dict(x_tilde=set(rng.choice(rest, size=min(2, len(rest)), replace=False).tolist()),
                              y=set(C))
            q = SeparationQuery(A, C, B, removal, **kwargs)
            n_cases += 1
            if d_separated(g, q) != d_separated_bruteforce(g, q):
                disagreements.append((g, q))
        assert not disagreements

    @settings(max_examples=200, deadline=None)
    @given(seed=st.integers(0, 2 ** 32 - 1))
    def test_symmetry(self, seed):
        rng = np.random.default_rng(seed)
        n = int(rng.integers(2, 10))
        g = random_admg(rng, n, 0.35, 0.15)
        A, C, B = random_query(rng, n)
        if set(A) & set(C):
            return
        assert d_separated(g, SeparationQuery(A, C, B)) == d_separated(g, SeparationQuery(C, A, B))

    @settings(max_examples=150, deadline=None)
    @given(seed=st.integers(0, 2 ** 32 - 1))
    def test_marginalization_preserves_separation(self, seed):
        # separation among kept nodes is the same before and after projection
        rng = np.random.default_rng(seed)
        n = int(rng.integers(3, 10))
        g = random_dag(rng, n, 0.4)
        M = [i for i in range(n) if rng.random() < 0.6]
        if len(M) < 2:
            return
        m = marginalize(g, M)
        sub = rng.permutation(M)
        A, C = [int(sub[0])], [int(sub[1])]
        B = [int(v) for v in sub[2:] if rng.random() < 0.5]
        q = SeparationQuery(A, C, B)
        assert d_separated(g, q) == d_separated(m, q)

    @settings(max_examples=150, deadline=None)
    @given(seed=st.integers(0, 2 ** 32 - 1))
    def test_marginalize_composes(self, seed):
        rng = np.random.default_rng(seed)
        n = int(rng.integers(3, 11))
        g = random_dag(rng, n, 0.35)
        M_outer = [i for i in range(n) if rng.random() < 0.7]
        M_inner = [i for i in M_outer if rng.random() < 0.7]
        assert marginalize(marginalize(g, M_outer), M_inner).same_edges(marginalize(g, M_inner))


def blocked_instrument_graph():
    directed = {("I", "X"), ("X", "Y"), ("H", "X"), ("H", "Y"), ("H", "B"), ("B", "I"), ("B", "Y")}
    return marginalize(MixedGraph(frozenset("IXYHB"), frozenset(directed)), "IXYB")


def nuisance_graph():
    directed = {("I", "X"), ("I", "Z"), ("X", "Y"), ("H", "X"), ("H", "Y"), ("H", "Z"), ("Z", "Y")}
    return marginalize(MixedGraph(frozenset("IXYHZ"), frozenset(directed)), "IXYZ")


def two_route_graph():
    directed = {("I", "X"), ("B", "I"), ("B", "Z"), ("B", "X"), ("H", "X"), ("H", "Y"), ("H", "Z"),
                ("Z", "Y"), ("X", "Y")}
    return marginalize(MixedGraph(frozenset("IXYHZB"), frozenset(directed)), "IXYZB")


class TestConditions:
    def test_conditional_instrument_graph(self):
        g = blocked_instrument_graph()
        r = check_conditions(g, {"I"}, {"X"}, {"B"}, "Y")
        assert r.c1 and r.c2 and r.holds
        assert not check_conditions(g, {"I"}, {"X"}, set(), "Y").holds
        # B as a nuisance regressor: its latent parent also drives Y
        assert not check_conditions(g, {"I"}, {"X", "B"}, set(), "Y").holds

    def test_nuisance_graph(self):
        g = nuisance_graph()
        r = check_conditions(g, {"I"}, {"X"}, {"Z"}, "Y")
        assert not r.c1
        assert not check_conditions(g, {"I"}, {"X"}, set(), "Y").holds
        r = check_conditions(g, {"I"}, {"X", "Z"}, set(), "Y")
        assert r.c1 and r.c2

    def test_graph_admitting_both(self):
        g = two_route_graph()
        assert check_conditions(g, {"I"}, {"X"}, {"B"}, "Y").holds
        assert check_conditions(g, {"I", "B"}, {"X", "Z"}, set(), "Y").holds

    def test_c2_descendant_of_treatment(self):
        g = MixedGraph(frozenset("IXYW"), frozenset({("I", "X"), ("X", "Y"), ("X", "W")}))
        r = check_conditions(g, {"I"}, {"X"}, {"W"}, "Y")
        assert r.c1 and not r.c2

    def test_c1prime_removes_mediated_edges(self):
        g = MixedGraph(frozenset("IXMY"), frozenset({("I", "X"), ("X", "M"), ("M", "Y")}),
                       frozenset({("X", "Y")}))
        assert not check_conditions(g, {"I"}, {"X"}, set(), "Y", "C1").c1
        assert check_conditions(g, {"I"}, {"X"}, set(), "Y", "C1prime").c1
        assert remove_effect_edges(g, {"X"}, {"Y"}).directed == {("I", "X"), ("M", "Y")}

    def test_overlapping_sets(self):
        with pytest.raises(ValueError):
            check_conditions(blocked_instrument_graph(), {"I"}, {"I"}, set(), "Y")


class TestSerialization:
    def test_json_and_dot(self, dense_scalar_model):
        g = project_window(dense_scalar_model.params, [("I1", -2), ("X1", -1), ("Y1", -1), ("Y1", 0)], 10)
        obj = json.loads(g.to_json())
        assert len(obj["nodes"]) == 4
        assert len(obj["directed"]) == len(g.directed)
        assert len(obj["bidirected"]) == len(g.bidirected)
        dot = g.to_dot()
        assert dot.startswith("digraph") and dot.count("dir=both") == len(g.bidirected)
        assert 'label="X1_t-1"' in dot
