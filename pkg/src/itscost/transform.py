"""Rewriting proven components into hierarchically loop-nested form: split,
flag-based source relocation, exits to the entry, the recursive nesting
construction and the structural validator."""
from __future__ import annotations

from dataclasses import dataclass, field
from itertools import combinations

from .graph_analysis import reachable, sccs, sccs_of, shortest_path
from .its_model import Atom, LinTerm, Transition, TransitionSystem, prime
from .linear_core import project
from .termination import prove_component, rf_for_strict, synthesize_lrf


class TransformError(RuntimeError):
    pass


def drop_primed(atoms) -> list:
    """Conjuncts without primed variables."""
    return [a for a in atoms if not a.has_primed()]


def _ge(v, c):
    return Atom.compare(LinTerm.var(v), ">=", LinTerm.constant(c))


def _eq(v, c):
    return Atom.compare(LinTerm.var(v), "=", LinTerm.constant(c))


# ------------------------------------------------------------ builder

class Builder:
    """Mutable view of a system under rewriting; all fresh names come from here."""

    def __init__(self, ts: TransitionSystem):
        self.variables = list(ts.variables)
        self.flags = set(ts.flags)
        self.entry = ts.entry
        self.locations = list(ts.locations)
        self.trans = {t.id: t for t in ts.transitions}
        self.next = ts.next_id()
        self.prov = dict(ts.provenance)
        self.log: list = []

    # transitions
    def add(self, src, dst, atoms) -> int:
        tid = self.next
        self.next += 1
        for l in (src, dst):
            if l not in self.locations:
                self.locations.append(l)
        self.trans[tid] = Transition(tid, src, dst, tuple(dict.fromkeys(atoms)))
        return tid

    def remove(self, tid):
        del self.trans[tid]

    def strengthen(self, tid, atoms):
        t = self.trans[tid]
        self.trans[tid] = t.with_atoms(list(t.atoms) + [a for a in atoms if a not in t.atoms])

    def get(self, tid) -> Transition:
        return self.trans[tid]

    def all(self) -> list:
        return [self.trans[i] for i in sorted(self.trans)]

    def internal(self, locs) -> list:
        return [t for t in self.all() if t.source in locs and t.target in locs]

    def entries(self, locs) -> list:
        return [t for t in self.all() if t.target in locs and t.source not in locs]

    def exits(self, locs) -> list:
        return [t for t in self.all() if t.source in locs and t.target not in locs]

    # names
    def fresh_loc(self, base, info) -> str:
        k = 1
        while f"{base}_{k}" in self.locations:
            k += 1
        name = f"{base}_{k}"
        self.locations.append(name)
        self.prov[name] = info
        return name

    def fresh_head(self) -> str:
        k = 0
        while f"f{k}" in self.locations:
            k += 1
        name = f"f{k}"
        self.locations.append(name)
        self.prov[name] = "outer-loop head"
        return name

    def fresh_flag(self) -> str:
        k = 1
        while f"nf{k}" in self.variables:
            k += 1
        name = f"nf{k}"
        self.variables.append(name)
        self.flags.add(name)
        return name

    def clone(self, locs, exclude=()) -> dict:
        """Copy the locations and internal transitions of ``locs`` (except the ids in
        ``exclude``); returns the mapping."""
        mu = {}
        for l in self.locations[:]:
            if l in locs:
                info = self.prov.get(l, "")
                base = info[len("clone-of "):] if info.startswith("clone-of ") else l
                mu[l] = self.fresh_loc(base, f"clone-of {base}")
        for t in self.internal(locs):
            if t.id not in exclude:
                self.add(mu[t.source], mu[t.target], t.atoms)
        return mu

    def to_ts(self) -> TransitionSystem:
        used = {self.entry} | {l for t in self.trans.values() for l in (t.source, t.target)}
        locs = tuple(l for l in self.locations if l in used)
        prov = {l: v for l, v in self.prov.items() if l in used}
        ts = TransitionSystem(tuple(self.variables), self.entry, tuple(self.all()), locs,
                              frozenset(self.flags), prov)
        return ts.canonical()


# ------------------------------------------------------------ split

@dataclass
class SplitResult:
    parts: list  # frozensets of locations, parts[0] holds the entry
    internal: list  # tuples of transition ids per part
    T: list  # tuples of transition ids per part

    def entries_of(self, i, byid) -> list:
        return sorted(tid for ts in self.T for tid in ts if byid[tid].target in self.parts[i])

    def shape(self) -> dict:
        return {"parts": [sorted(p) for p in self.parts], "T": [sorted(t) for t in self.T]}


def _strongly_connected(locs, transitions) -> bool:
    locs = set(locs)
    if len(locs) == 1:
        return True
    trs = [t for t in transitions if t.source in locs and t.target in locs]
    start = next(iter(sorted(locs)))
    fwd = reachable(start, trs)
    bwd = reachable(start, [Transition(t.id, t.target, t.source) for t in trs])
    return locs <= fwd and locs <= bwd


def check_split(transitions, entry, proof, sp: SplitResult) -> list:
    """Violated conditions (letters a-h) of a split candidate."""
    byid = {t.id: t for t in transitions}
    bad = []
    ids = [i for part in sp.internal for i in part] + [i for ts in sp.T for i in ts]
    if sorted(ids) != sorted(byid):
        bad.append("a")
    sub = set()
    for p in list(proof.subproofs())[1:]:
        sub |= set(p.transitions)
    if any(i not in sub and i not in proof.removed for part in sp.internal for i in part):
        bad.append("b")
    if any(i not in proof.removed for ts in sp.T for i in ts) or any(not ts for ts in sp.T):
        bad.append("c")
    if not sp.parts or entry not in sp.parts[0]:
        bad.append("d")
    seen = set()
    for locs, internal in zip(sp.parts, sp.internal):
        trs = [byid[i] for i in internal]
        if seen & locs or any(t.source not in locs or t.target not in locs for t in trs):
            bad.append("e")
            break
        seen |= locs
        if (len(locs) > 1 or trs) and not (trs and _strongly_connected(locs, trs)):
            bad.append("e")
            break
        if len(locs) > 1 and len({l for t in trs for l in (t.source, t.target)}) < len(locs):
            bad.append("e")
            break
    for i, ts in enumerate(sp.T):
        if any(byid[t].source not in sp.parts[i] for t in ts):
            bad.append("f")
            break
    for i, ts in enumerate(sp.T):
        for t in ts:
            j = next((k for k, p in enumerate(sp.parts) if byid[t].target in p), None)
            if j is None or not (j > i or j == 0):
                bad.append("g")
                break
        if "g" in bad:
            break
    into0 = {byid[t].target for ts in sp.T for t in ts if byid[t].target in sp.parts[0]}
    if len(into0) > 1:
        bad.append("h")
    return bad


def _order_parts(parts, T_edges, entry):
    """Index of each part: the entry part first, the rest topologically along
    T-edges that do not return to the entry part.  None if those edges cycle."""
    n = len(parts)
    p0 = next(i for i, p in enumerate(parts) if entry in p)
    succ = {i: set() for i in range(n)}
    for a, b in T_edges:
        if b != p0 and a != b:
            succ[a].add(b)
    indeg = {i: 0 for i in range(n)}
    for a in succ:
        for b in succ[a]:
            indeg[b] += 1
    order = [p0]
    ready = sorted((i for i in range(n) if indeg[i] == 0 and i != p0), key=lambda i: min(parts[i]))
    # p0's successors become ready once p0 is placed
    for b in succ[p0]:
        indeg[b] -= 1
        if indeg[b] == 0:
            ready.append(b)
    ready = sorted(set(ready), key=lambda i: min(parts[i]))
    while ready:
        i = ready.pop(0)
        order.append(i)
        for b in sorted(succ[i]):
            indeg[b] -= 1
            if indeg[b] == 0:
                ready.append(b)
        ready.sort(key=lambda i: min(parts[i]))
    if len(order) != n:
        return None
    return order


def split(transitions, entry, proof) -> SplitResult:
    """Sub-SCCs and outer-loop transition sets of a proven component."""
    transitions = sorted(transitions, key=lambda t: t.id)
    byid = {t.id: t for t in transitions}
    locs = sorted({l for t in transitions for l in (t.source, t.target)})
    pool = sorted(proof.strict or proof.removed)
    groups: dict = {}
    for i in pool:
        t = byid[i]
        groups.setdefault((t.source, t.target), []).append(i)
    first = max(groups.values(), key=lambda g: (len(g), -min(g)))
    removed = set(first)
    kept = [t for t in transitions if t.id not in removed]
    comps = sccs_of(locs, kept)
    parts = [set(c.locations) for c in comps]
    inner = {i for c in comps for i in c.transitions}
    for _ in range(len(locs) + 2):
        part_of = {l: i for i, p in enumerate(parts) for l in p}
        internal = [[] for _ in parts]
        T_all = []
        for t in transitions:
            if t.id in inner:
                internal[part_of[t.source]].append(t.id)
            else:
                T_all.append(t.id)
        edges = [(part_of[byid[t].source], part_of[byid[t].target]) for t in T_all]
        p0 = part_of[entry]
        order = _order_parts(parts, edges, entry)
        if any(a == c != p0 for a, c in edges):
            order = None
        into0 = {byid[t].target for t in T_all if part_of[byid[t].target] == p0}
        if order is not None and len(into0) <= 1:
            pos = {old: new for new, old in enumerate(order)}
            return SplitResult([frozenset(parts[i]) for i in order],
                               [tuple(sorted(internal[i])) for i in order],
                               [tuple(sorted(t for t in T_all if pos[part_of[byid[t].source]] == k))
                                for k in range(len(order))])
        # merge the entry part with every part that reaches an offending source
        if order is None:
            offending = {a for a, c in edges if c != p0 and a != p0}
        else:
            tgts = sorted(into0)
            keep = min(tgts, key=lambda l: (-sum(1 for t in T_all if byid[t].target == l), l))
            offending = {part_of[byid[t].source] for t in T_all
                         if part_of[byid[t].target] == p0 and byid[t].target != keep}
        back: dict = {}
        for a, c in edges:
            back.setdefault(c, set()).add(a)
        merge = set(offending) - {p0}
        todo = list(merge)
        while todo:
            x = todo.pop()
            for y in back.get(x, ()):
                if y not in merge and y != p0:
                    merge.add(y)
                    todo.append(y)
        merged = set(parts[p0])
        for i in merge:
            merged |= parts[i]
        parts = [merged] + [p for i, p in enumerate(parts) if i != p0 and i not in merge]
        inside = [t for t in transitions if t.source in merged and t.target in merged]
        inner |= _choose_put_back(inside, merged, set(T_all))
    raise TransformError("split repair did not converge")


def _choose_put_back(inside, merged, candidates) -> set:
    """Transitions of the merged part taken back from T so the part is an SCC and the
    remaining T-transitions inside it share one target."""
    base = [t for t in inside if t.id not in candidates]
    cand = sorted((t for t in inside if t.id in candidates), key=lambda t: t.id)
    targets = sorted({t.target for t in cand})
    # greedy in id order first, then per common target, then small subsets
    chosen = []
    for t in cand:
        if _strongly_connected(merged, base + chosen):
            break
        chosen.append(t)
    rest = [t for t in cand if t not in chosen]
    if _strongly_connected(merged, base + chosen) and rest and len({t.target for t in rest}) == 1:
        return {t.id for t in chosen}
    for tgt in targets:
        others = [t for t in cand if t.target != tgt]
        same = [t for t in cand if t.target == tgt]
        for k in range(len(same)):
            for extra in combinations(same, k):
                if _strongly_connected(merged, base + others + list(extra)):
                    if len(extra) < len(same):
                        return {t.id for t in others + list(extra)}
    raise TransformError("no valid split found for merged component")


# ------------------------------------------------------------ moving sources

def move_source_location(b: Builder, locs, T, e: str) -> dict:
    """Relocate transitions ``T`` (common source l) of component ``locs`` to leave
    from ``e``, walking a flag-guarded copy of an existing l -> e path.
    Returns old id -> new id of the moved transitions."""
    T = sorted(T)
    if not T:
        return {}
    l = b.get(T[0]).source
    if any(b.get(t).source != l for t in T):
        raise TransformError("moved transitions must share their source")
    if l == e:
        return {t: t for t in T}
    locs = set(locs)
    path = shortest_path([t for t in b.internal(locs) if t.id not in T], l, e)
    if path is None:
        raise TransformError(f"no path from {l} to {e}")
    n = b.fresh_flag()
    b.log.append(("move", l, e, n, tuple(T)))
    np = prime(n)
    guard = _ge(n, 1)
    for t in b.all():
        if t.source in locs and t.id not in T:
            b.strengthen(t.id, [guard])
    for t in b.entries(locs):
        b.strengthen(t.id, [_eq(np, 1)])
    moved = {}
    for tid in T:
        t = b.get(tid)
        down = drop_primed(t.atoms)
        for i, edge in enumerate(path):
            extra = [guard, _eq(np, 0)] if i == 0 else [_eq(n, 0), _eq(np, 0)]
            b.add(edge.source, edge.target, down + extra)
        moved[tid] = b.add(e, t.target, list(t.atoms) + [_eq(n, 0), _eq(np, 1)])
        b.remove(tid)
    return moved


def exit_to_entry(b: Builder, locs, e: str) -> list:
    """Make every exit of ``locs`` leave from ``e``; returns the ids of all exits."""
    groups: dict = {}
    for t in b.exits(locs):
        if t.source != e:
            groups.setdefault(t.source, []).append(t.id)
    for src in sorted(groups):
        move_source_location(b, locs, groups[src], e)
    return [t.id for t in b.exits(locs)]


# ------------------------------------------------------------ nesting

@dataclass
class TransformLog:
    splits: list = field(default_factory=list)
    moves: int = 0
    clones: int = 0


def _entry_location(b: Builder, locs) -> str:
    ins = {t.target for t in b.entries(locs)}
    if b.entry in locs:
        ins.add(b.entry)
    if len(ins) != 1:
        raise TransformError(f"component {sorted(locs)} has entry locations {sorted(ins)}")
    return next(iter(ins))


def _without_flags(t: Transition, flags) -> Transition:
    """``t`` with the flag variables projected out; ranking functions never use
    them and each one would add columns to the synthesis problem."""
    used = {v for a in t.atoms for v in a.variables()}
    fl = [v for v in flags if v in used or prime(v) in used]
    if not fl:
        return t
    upd = t.updated()
    frame = [Atom.eq(LinTerm.var(prime(v)) - LinTerm.var(v)) for v in fl if v not in upd]
    atoms = project(list(t.atoms) + frame, fl + [prime(v) for v in fl])
    return t if atoms is None else t.with_atoms(atoms)


def _prove(b: Builder, locs):
    trs = b.internal(locs)
    flags = sorted(b.flags)
    res = prove_component([_without_flags(t, flags) for t in trs], b.variables, conditional=False)
    if res is None and flags:
        res = prove_component(trs, b.variables, conditional=False, avoid=flags)
    if res is None:
        raise TransformError(f"no unconditional proof for component {sorted(locs)}")
    return trs, res[0]


def nested_loop_trans(b: Builder, locs, log: TransformLog, depth: int = 0, cap: int = 32):
    """Rewrite the component on ``locs`` (single entry e, all exits from e) in place."""
    if depth > cap:
        raise TransformError(f"nesting recursion limit {cap} exceeded")
    locs = set(locs)
    e = _entry_location(b, locs)
    if any(t.source != e for t in b.exits(locs)):
        raise TransformError("exits must leave from the entry location")
    trs, proof = _prove(b, locs)
    sp = split(trs, e, proof)
    bad = check_split(trs, e, proof, sp)
    if bad:
        raise TransformError(f"invalid split, conditions {bad}")
    log.splits.append(sp.shape())
    if len(sp.parts) == 1 and len(sp.parts[0]) == 1 and not sp.internal[0]:
        return
    parts = [set(p) for p in sp.parts]
    T = [list(t) for t in sp.T]
    # step 2: one split-entry location per part, then move T-sources onto it
    i = 1
    while i < len(parts):
        tgts = sorted({b.get(t).target for ts in T for t in ts if b.get(t).target in parts[i]})
        for tgt in tgts[1:]:
            mu = b.clone(parts[i])
            log.clones += 1
            newT = []
            for tid in T[i]:
                t = b.get(tid)
                newT.append(b.add(mu[t.source], t.target, t.atoms))
            for ts in T:
                for k, tid in enumerate(ts):
                    t = b.get(tid)
                    if t.target == tgt:
                        t2 = b.add(t.source, mu[tgt], t.atoms)
                        b.remove(tid)
                        ts[k] = t2
            parts.insert(i + 1, set(mu.values()))
            T.insert(i + 1, newT)
        i += 1
    s_of = []
    for i, p in enumerate(parts):
        tgts = sorted({b.get(t).target for ts in T for t in ts if b.get(t).target in p})
        s_of.append(tgts[0] if tgts else (e if i == 0 else sorted(p)[0]))
    for i, p in enumerate(parts):
        groups: dict = {}
        for tid in T[i]:
            src = b.get(tid).source
            if src != s_of[i]:
                groups.setdefault(src, []).append(tid)
        for src in sorted(groups):
            moved = move_source_location(b, p, groups[src], s_of[i])
            log.moves += 1
            T[i] = [moved.get(t, t) for t in T[i]]
    s = s_of[0]
    # step 3
    tset = {t for ts in T for t in ts}
    trivial = [not [t for t in b.internal(p) if t.id not in tset] for p in parts]
    f = [sorted(p)[0] if trivial[i] else b.fresh_head() for i, p in enumerate(parts)]
    c_entries = b.entries(locs)
    c_exits = b.exits(locs)
    # step 4
    if not (trivial[0] and parts[0] == {e}):
        mu = b.clone(parts[0], tset)
        log.clones += 1
        for t in c_entries:
            b.add(t.source, mu[e], t.atoms)
            if e == s:
                b.add(t.source, f[0], t.atoms)
            b.remove(t.id)
        for tid in T[0]:
            t = b.get(tid)
            b.add(mu[t.source], f[0], drop_primed(t.atoms))
        for t in c_exits:
            if e == s:
                b.add(mu[e], f[0], drop_primed(t.atoms))
            else:
                b.add(mu[e], t.target, t.atoms)
        clone_locs = set(mu.values())
        if e != s:
            exit_to_entry(b, clone_locs, mu[e])
        _nest_region(b, clone_locs, log, depth + 1, cap)
    # step 5
    for i, p in enumerate(parts):
        if trivial[i]:
            continue
        for tid in T[i]:
            if tid not in b.trans:
                continue
            t = b.get(tid)
            b.add(f[i], t.target, t.atoms)
            b.add(t.source, f[i], drop_primed(t.atoms))
            b.remove(tid)
    # step 6
    if not trivial[0]:
        if e != s:
            exit_to_entry(b, parts[0], s)
        outer = set(locs) | set(f)
        for t in b.exits(parts[0]):
            if t.target not in outer:
                b.add(t.source, f[0], drop_primed(t.atoms))
                b.add(f[0], t.target, t.atoms)
                b.remove(t.id)
    # step 7
    for i, p in enumerate(parts):
        if not trivial[i]:
            _nest_region(b, p, log, depth + 1, cap)


@dataclass
class TransformResult:
    ts: TransitionSystem
    log: TransformLog
    loops: list  # Loop annotations of every non-trivial SCC
    diagnostics: list


def _prune_unreachable(ts: TransitionSystem) -> TransitionSystem:
    live = reachable(ts.entry, ts.transitions)
    trs = tuple(t for t in ts.transitions if t.source in live)
    return ts.replace(transitions=trs, locations=tuple(l for l in ts.locations if l in live))


_OTHER = 2  # any flag value other than 0 and 1
_TOP = frozenset({0, 1, _OTHER})


def _admits(a: Atom, v: str, cls) -> bool:
    """Whether some value of class ``cls`` for ``v`` satisfies the one-variable atom."""
    if cls != _OTHER:
        return a.holds({v: cls})
    k, d = a.lhs.coeff(v), a.lhs.const
    if a.rel == "=":
        return -d % k == 0 and -d // k not in (0, 1)
    return any(a.holds({v: x}) for x in (-10**9, -1, 2, 10**9))


def _flag_step(t: Transition, state: dict, flags) -> dict | None:
    """Abstract post-state of ``t`` on flag classes, or None when ``t`` is disabled."""
    allowed = dict(state)
    for a in t.atoms:
        vs = a.variables()
        if len(vs) == 1 and next(iter(vs)) in flags:
            v = next(iter(vs))
            allowed[v] = frozenset(c for c in allowed[v] if _admits(a, v, c))
            if not allowed[v]:
                return None
    post = dict(allowed)
    for v in flags:
        if v not in t.updated():
            continue
        vp = prime(v)
        fixed = [a for a in t.atoms if a.rel == "=" and a.variables() == {vp}]
        if fixed:
            k, d = fixed[0].lhs.coeff(vp), fixed[0].lhs.const
            val = -d // k if -d % k == 0 else None
            post[v] = frozenset({val if val in (0, 1) else _OTHER})
        else:
            post[v] = _TOP
    return post


def prune_dead_flags(b: Builder, locs) -> int:
    """Remove transitions leaving ``locs`` that no run entering the region can take,
    judging only the values of flag variables; returns how many were removed."""
    flags = sorted(b.flags)
    if not flags:
        return 0
    locs = set(locs)
    top = {v: _TOP for v in flags}
    states: dict = {}
    work = []

    def join(loc, st):
        old = states.get(loc)
        new = st if old is None else {v: old[v] | st[v] for v in flags}
        if old != new:
            states[loc] = new
            work.append(loc)

    if b.entry in locs:
        join(b.entry, top)
    for t in b.entries(locs):
        post = _flag_step(t, top, flags)
        if post is not None:
            join(t.target, post)
    out: dict = {}
    for t in b.all():
        if t.source in locs:
            out.setdefault(t.source, []).append(t)
    live = set()
    while work:
        loc = work.pop()
        for t in out.get(loc, ()):
            post = _flag_step(t, states[loc], flags)
            if post is None:
                continue
            live.add(t.id)
            if t.target in locs:
                join(t.target, post)
    dead = [t.id for ts in out.values() for t in ts if t.id not in live]
    for tid in dead:
        b.remove(tid)
    return len(dead)


def _nest_region(b: Builder, locs, log, depth: int, cap: int):
    """Make every SCC within ``locs`` loop-nested: clone per entry location, route
    exits through the entry, then apply the nesting transformation."""
    prune_dead_flags(b, locs)
    internal = b.internal(set(locs))
    order = [l for l in b.locations if l in locs]
    for comp in reversed(sccs_of(order, internal)):
        if comp.trivial:
            continue
        locs = set(comp.locations)
        ins = sorted({t.target for t in b.entries(locs)})
        groups = []
        if len(ins) <= 1:
            groups.append(locs)
        else:
            exits = b.exits(locs)
            for tgt in ins[1:]:
                mu = b.clone(locs)
                log.clones += 1
                for t in b.entries(locs):
                    if t.target == tgt:
                        b.add(t.source, mu[tgt], t.atoms)
                        b.remove(t.id)
                for t in exits:
                    b.add(mu[t.source], t.target, t.atoms)
                groups.append(set(mu.values()))
            groups.insert(0, locs)
        for g in groups:
            e = _entry_location(b, g)
            if any(t.source != e for t in b.exits(g)):
                exit_to_entry(b, g, e)
                log.moves += 1
            nested_loop_trans(b, g, log, depth, cap)


def transform_system(ts: TransitionSystem, cap: int = 32) -> TransformResult:
    """Clone components per entry location, route exits through the entry and nest."""
    ts = _prune_unreachable(ts)
    b = Builder(ts)
    log = TransformLog()
    _nest_region(b, set(ts.locations), log, 0, cap)
    out = b.to_ts()
    ok, diags, loops = validate(out)
    return TransformResult(out, log, loops, diags)


# ------------------------------------------------------------ validation

@dataclass
class Loop:
    head: str
    locations: frozenset
    transitions: tuple
    rf: dict
    strict: frozenset
    children: tuple = ()

    def all(self):
        yield self
        for c in self.children:
            yield from c.all()


def _level(ts, trs, locs, e, diags, depth=0):
    if depth > 64:
        diags.append("nesting too deep")
        return None
    byid = {t.id: t for t in trs}
    outs = [t.id for t in trs if t.source == e]
    ins = [t.id for t in trs if t.target == e]
    rf, strict = None, None
    # flags rarely matter for ranking, so try without their columns first
    attempts = [(trs, ts.variables)]
    if ts.flags:
        flags = sorted(ts.flags)
        attempts.insert(0, ([_without_flags(t, flags) for t in trs], ts.program_vars()))
    for cand in (outs, ins):
        for its, vs in attempts:
            if cand and rf is None:
                r = rf_for_strict(its, vs, cand)
                if r is not None:
                    rf, strict = r, frozenset(cand)
    for its, vs in attempts:
        if rf is None:
            res = synthesize_lrf(its, vs)
            if res is not None:
                rest = [t for t in trs if t.id not in res[1]]
                if not any(e in c.locations and not c.trivial for c in sccs_of(sorted(locs), rest)):
                    rf, strict = res
    if rf is None:
        diags.append(f"loop at {e} has no linear ranking function cutting its cycles")
        return None
    rest_locs = sorted(l for l in locs if l != e)
    inner = [t for t in trs if t.source != e and t.target != e]
    children = []
    for c in sccs_of(rest_locs, inner):
        if c.trivial:
            continue
        cin = {t.target for t in trs if t.target in c.locations and t.source not in c.locations}
        cout = {t.source for t in trs if t.source in c.locations and t.target not in c.locations}
        if len(cin) != 1 or not cout <= cin:
            diags.append(f"sub-component {sorted(c.locations)} lacks a single entry and exit location")
            return None
        sub = _level(ts, [byid[i] for i in c.transitions], c.locations, next(iter(cin)), diags, depth + 1)
        if sub is None:
            return None
        children.append(sub)
    return Loop(e, frozenset(locs), tuple(sorted(t.id for t in trs)), rf, strict, tuple(children))


def is_lb_hierarchically_loop_nested(ts, comp) -> tuple:
    """(ok, diagnostics, Loop annotation) for one SCC of ``ts``."""
    diags = []
    if comp.trivial:
        return True, diags, None
    byid = ts.by_id()
    trs = [byid[i] for i in comp.transitions]
    ins = {t.target for t in ts.transitions if t.target in comp.locations and t.source not in comp.locations}
    if ts.entry in comp.locations:
        ins.add(ts.entry)
    outs = {t.source for t in ts.transitions if t.source in comp.locations and t.target not in comp.locations}
    if len(ins) != 1 or not outs <= ins:
        diags.append(f"component {sorted(comp.locations)} lacks a single entry and exit location")
        return False, diags, None
    loop = _level(ts, trs, comp.locations, next(iter(ins)), diags)
    return loop is not None, diags, loop


def validate(ts) -> tuple:
    """Check every non-trivial SCC; returns (ok, diagnostics, loops)."""
    ok, diags, loops = True, [], []
    for comp in sccs(ts):
        if comp.trivial:
            continue
        good, d, loop = is_lb_hierarchically_loop_nested(ts, comp)
        ok &= good
        diags += d
        if loop is not None:
            loops.append(loop)
    return ok, diags, loops
