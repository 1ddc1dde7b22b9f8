import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import load
from itscost.graph_analysis import (CycleLimitExceeded, component_graph, cycles_through_entry,
                                    entry_exit, reachable, sccs, sccs_of, shortest_path)
from itscost.its_model import Transition, parse_its


def test_aaron3_sccs():
    ts = load("aaron3")
    comps = sccs(ts)
    assert [sorted(c.locations) for c in comps] == [["l2"], ["l1"], ["l0"]]
    l1 = comps[1]
    assert len(l1.transitions) == 2 and not l1.trivial
    assert comps[0].trivial and comps[2].trivial


def test_single_location():
    ts = parse_its("vars x\nentry a\n")
    (c,) = sccs(ts)
    assert c.trivial and c.locations == {"a"}


def test_entry_exit_aaron3():
    ts = load("aaron3")
    comps = sccs(ts)
    entries, exits = entry_exit(ts, comps[1])
    assert [(t.source, t.target) for t in entries] == [("l0", "l1")]
    assert sorted(t.id for t in exits) == sorted(t.id for t in ts.transitions if t.target == "l2")
    assert entry_exit(ts, comps[0])[1] == []


def test_transformed_aaron3_entry_exit(aaron3_report):
    ts = aaron3_report.transformed
    (c,) = [c for c in sccs(ts) if "f0" in c.locations]
    entries, exits = entry_exit(ts, c)
    assert {t.target for t in entries} == {"f0"}
    assert {t.source for t in exits} == {"f0"}
    assert len(entries) == 5  # from l0 and the four exits of the clone
    assert len(exits) == 3


def test_single_cycle_in_f0_component(aaron3_report):
    ts = aaron3_report.transformed
    (c,) = [c for c in sccs(ts) if "f0" in c.locations]
    cycles = cycles_through_entry(ts, c, "f0")
    assert len(cycles) == 1
    assert len(cycles[0].parts) == 1


TWO_PARTS = """vars x
entry s
s -> e [ true ]
e -> d1 [ x >= 1 ]
d1 -> e [ x >= 2 ]
d1 -> d2 [ x >= 3 ]
d2 -> e [ x >= 4 ]
d1 -> d1 [ x >= 5 ]
"""


def test_two_parallel_parts():
    ts = parse_its(TWO_PARTS)
    (c,) = [c for c in sccs(ts) if not c.trivial]
    g = component_graph(ts, c, "e")
    assert len(g.parts) == 2
    cycles = cycles_through_entry(ts, c, "e")
    assert sorted(cy.parts for cy in cycles) == [("d1",), ("d1", "d2")]


def test_cycle_limit():
    ts = parse_its(TWO_PARTS)
    (c,) = [c for c in sccs(ts) if not c.trivial]
    with pytest.raises(CycleLimitExceeded):
        cycles_through_entry(ts, c, "e", limit=1)


def test_shortest_path_ties():
    ts = parse_its("vars x\nentry a\na -> b [ true ]\na -> c [ true ]\nb -> d [ true ]\nc -> d [ true ]\n")
    path = shortest_path(ts.transitions, "a", "d")
    assert [t.target for t in path] == ["b", "d"]
    assert shortest_path(ts.transitions, "d", "a") is None
    assert shortest_path(ts.transitions, "a", "a") == []


edges = st.lists(st.tuples(st.integers(0, 5), st.integers(0, 5)), max_size=14)


def graph(es):
    locs = [f"n{i}" for i in range(6)]
    trs = [Transition(i, f"n{a}", f"n{b}", ()) for i, (a, b) in enumerate(es)]
    return locs, trs


@settings(max_examples=200, deadline=None)
@given(edges)
def test_sccs_partition_and_reachability(es):
    locs, trs = graph(es)
    comps = sccs_of(locs, trs)
    seen = [l for c in comps for l in c.locations]
    assert sorted(seen) == sorted(locs)
    reach = {l: reachable(l, trs) for l in locs}
    for c in comps:
        for a in c.locations:
            for b in c.locations:
                assert b in reach[a]
        # recomputing on the induced subgraph returns the component itself
        (again,) = sccs_of(sorted(c.locations), trs)
        assert again.locations == c.locations and again.transitions == c.transitions
    # reverse topological order: no edge from an earlier component to a later one
    pos = {l: i for i, c in enumerate(comps) for l in c.locations}
    for t in trs:
        assert pos[t.source] >= pos[t.target]


@settings(max_examples=100, deadline=None)
@given(edges)
def test_condensation_is_acyclic(es):
    locs, trs = graph(es)

    class TS:
        transitions = tuple(trs)
        locations = tuple(locs)

        @staticmethod
        def by_id():
            return {t.id: t for t in trs}

    for c in sccs_of(locs, trs):
        if c.trivial or "n0" not in c.locations:
            continue
        g = component_graph(TS, c, "n0")
        order = {}
        for i in range(len(g.parts)):
            for j in g.edges[i]:
                assert j != i
                order.setdefault(i, set()).add(j)
        # no cycles among parts: DFS
        state = {}

        def dfs(v):
            state[v] = 1
            for w in order.get(v, ()):
                assert state.get(w) != 1
                if w not in state:
                    dfs(w)
            state[v] = 2

        for i in range(len(g.parts)):
            if i not in state:
                dfs(i)
