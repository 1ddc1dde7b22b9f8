"""Strongly connected components, entry/exit bookkeeping, condensation and
cycle enumeration through a component's entry location."""
from __future__ import annotations

from collections import deque
from dataclasses import dataclass
from typing import Iterable


class CycleLimitExceeded(RuntimeError):
    pass


@dataclass(frozen=True)
class Component:
    id: int
    locations: frozenset
    transitions: tuple  # ids of internal transitions, sorted

    @property
    def trivial(self) -> bool:
        return not self.transitions

    def __contains__(self, loc) -> bool:
        return loc in self.locations


def _tarjan(nodes: list, succ: dict) -> list:
    """Tarjan's algorithm, iterative; components come out in reverse topological order."""
    index = {}
    low = {}
    on_stack = set()
    stack = []
    out = []
    counter = 0
    for root in nodes:
        if root in index:
            continue
        work = [(root, iter(succ.get(root, ())))]
        index[root] = low[root] = counter
        counter += 1
        stack.append(root)
        on_stack.add(root)
        while work:
            v, it = work[-1]
            advanced = False
            for w in it:
                if w not in index:
                    index[w] = low[w] = counter
                    counter += 1
                    stack.append(w)
                    on_stack.add(w)
                    work.append((w, iter(succ.get(w, ()))))
                    advanced = True
                    break
                if w in on_stack:
                    low[v] = min(low[v], index[w])
            if advanced:
                continue
            work.pop()
            if work:
                u = work[-1][0]
                low[u] = min(low[u], low[v])
            if low[v] == index[v]:
                comp = []
                while True:
                    w = stack.pop()
                    on_stack.discard(w)
                    comp.append(w)
                    if w == v:
                        break
                out.append(comp)
    return out


def sccs_of(locations: Iterable[str], transitions: Iterable) -> list:
    """SCCs of the graph given by ``locations`` and the transitions among them."""
    locations = list(locations)
    locset = set(locations)
    transitions = [t for t in transitions if t.source in locset and t.target in locset]
    succ: dict = {}
    for t in sorted(transitions, key=lambda t: t.id):
        succ.setdefault(t.source, [])
        if t.target not in succ[t.source]:
            succ[t.source].append(t.target)
    comps = []
    for i, locs in enumerate(_tarjan(locations, succ)):
        ls = frozenset(locs)
        internal = tuple(sorted(t.id for t in transitions if t.source in ls and t.target in ls))
        comps.append(Component(i, ls, internal))
    return comps


def sccs(ts) -> list:
    """Components of ``ts`` in reverse topological order."""
    return sccs_of(ts.locations, ts.transitions)


def entry_exit(ts, comp: Component):
    """(entry transitions, exit transitions) of ``comp`` within ``ts``."""
    entries = [t for t in ts.transitions if t.target in comp.locations and t.source not in comp.locations]
    exits = [t for t in ts.transitions if t.source in comp.locations and t.target not in comp.locations]
    return entries, exits


def entry_locations(ts, comp: Component) -> list:
    entries, _ = entry_exit(ts, comp)
    locs = [t.target for t in entries]
    if ts.entry in comp.locations:
        locs.append(ts.entry)
    return sorted(set(locs))


def exit_locations(ts, comp: Component) -> list:
    _, exits = entry_exit(ts, comp)
    return sorted({t.source for t in exits})


def reachable(start: str, transitions: Iterable) -> set:
    succ: dict = {}
    for t in transitions:
        succ.setdefault(t.source, []).append(t.target)
    seen = {start}
    todo = [start]
    while todo:
        v = todo.pop()
        for w in succ.get(v, ()):
            if w not in seen:
                seen.add(w)
                todo.append(w)
    return seen


def shortest_path(transitions: Iterable, src: str, dst: str):
    """Fewest-edge path from ``src`` to ``dst`` as a list of transitions; ties go to
    smaller transition ids.  None when unreachable; [] when src == dst."""
    if src == dst:
        return []
    out: dict = {}
    for t in sorted(transitions, key=lambda t: t.id):
        out.setdefault(t.source, []).append(t)
    prev = {src: None}
    q = deque([src])
    while q:
        v = q.popleft()
        for t in out.get(v, ()):
            if t.target not in prev:
                prev[t.target] = t
                if t.target == dst:
                    path = []
                    w = dst
                    while prev[w] is not None:
                        path.append(prev[w])
                        w = prev[w].source
                    return path[::-1]
                q.append(t.target)
    return None


@dataclass(frozen=True)
class ComponentGraph:
    """Condensation of a component with its entry location removed."""

    entry: str
    parts: tuple  # Components over locations other than entry
    part_of: dict  # location -> index into parts
    edges: dict  # part index -> sorted successor part indices
    into: dict  # part index -> transitions entry -> part
    back: frozenset  # part indices with a transition back to entry


def component_graph(ts, comp: Component, entry: str) -> ComponentGraph:
    byid = ts.by_id()
    internal = [byid[i] for i in comp.transitions]
    rest = [l for l in ts.locations if l in comp.locations and l != entry]
    parts = tuple(reversed(sccs_of(rest, [t for t in internal if t.source != entry and t.target != entry])))
    part_of = {l: i for i, p in enumerate(parts) for l in p.locations}
    edges: dict = {i: set() for i in range(len(parts))}
    into: dict = {i: [] for i in range(len(parts))}
    back = set()
    for t in internal:
        s, d = t.source, t.target
        if s == entry and d != entry:
            into[part_of[d]].append(t)
        elif s != entry and d == entry:
            back.add(part_of[s])
        elif s != entry and d != entry and part_of[s] != part_of[d]:
            edges[part_of[s]].add(part_of[d])
    for i in edges:
        if i in edges[i]:  # pragma: no cover - parts are SCCs
            raise AssertionError("self edge in condensation")
    return ComponentGraph(entry, parts, part_of, {i: sorted(v) for i, v in edges.items()},
                          into, frozenset(back))


@dataclass(frozen=True)
class Cycle:
    first: int  # id of the transition leaving the entry location
    parts: tuple  # entry locations of the condensed parts visited, in order
    part_ids: tuple


def cycles_through_entry(ts, comp: Component, entry: str, limit: int = 10_000) -> list:
    """Every cycle entry -tau-> d_1 -> ... -> d_j -> entry of the condensation, one per
    distinct first transition and part sequence; self-loops at the entry give j = 0."""
    g = component_graph(ts, comp, entry)
    byid = ts.by_id()
    out = []
    for tid in comp.transitions:
        t = byid[tid]
        if t.source != entry:
            continue
        if t.target == entry:
            out.append(Cycle(tid, (), ()))
            continue
        start = g.part_of[t.target]
        stack = [(start, (start,))]
        while stack:
            p, path = stack.pop()
            if p in g.back:
                out.append(Cycle(tid, tuple(_part_entry(g, i, byid, comp) for i in path), path))
                if len(out) > limit:
                    raise CycleLimitExceeded(f"cycle enumeration limit {limit} exceeded")
            for q in reversed(g.edges[p]):
                stack.append((q, path + (q,)))
    return out


def _part_entry(g: ComponentGraph, i: int, byid, comp) -> str:
    """The location through which part ``i`` is entered (smallest name if several)."""
    part = g.parts[i]
    if len(part.locations) == 1:
        return next(iter(part.locations))
    ins = sorted({byid[t].target for t in comp.transitions
                  if byid[t].target in part.locations and byid[t].source not in part.locations})
    return ins[0]
