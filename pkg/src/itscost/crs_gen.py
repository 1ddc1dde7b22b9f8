"""Cost relation systems: generation from a loop-nested ITS, ranking-function
embedding, conditional entry, and a textual eq/4 form."""
from __future__ import annotations

import re
from dataclasses import dataclass, field, replace

from .graph_analysis import Component, component_graph, cycles_through_entry, sccs
from .its_model import Atom, LinTerm, format_atom, is_primed, is_undef, parse_atoms, prime, unprime
from .size_rel import size_relations


class CRSError(ValueError):
    pass


@dataclass(frozen=True)
class CostEquation:
    head: str
    params: tuple
    cost: int
    calls: tuple  # of (function, args)
    atoms: tuple

    @property
    def recursive(self) -> bool:
        return any(f == self.head for f, _ in self.calls)

    def symbols(self) -> set:
        out = set(self.params)
        for _, args in self.calls:
            out |= set(args)
        for a in self.atoms:
            out |= a.variables()
        return out


@dataclass
class CRS:
    entry: str
    equations: list
    variables: tuple = ()
    functions: dict = field(default_factory=dict)  # function -> location
    rf_embedded: bool = False
    conditional: bool = False

    def by_head(self, head: str) -> list:
        return [e for e in self.equations if e.head == head]


def fname(loc: str) -> str:
    return "c_" + re.sub(r"[^A-Za-z0-9_]", "_", loc)


class _Names:
    """Equation-level symbol names: head parameters, call families, locals."""

    def __init__(self, variables):
        self.base = {}
        taken = set()
        for v in variables:
            b = v[0].upper() + v[1:] if v[0].islower() else "V_" + v
            while b in taken:
                b += "_"
            taken.add(b)
            self.base[v] = b
        self.sep = "_" if any(b[-1].isdigit() for b in taken) else ""
        self.local = next(p for p in ("U", "W", "Loc") if not any(b == p or b.startswith(p) for b in taken))
        self.rf = next(p for p in ("R", "Rf", "Rank") if not any(b == p or b.startswith(p) for b in taken))

    def param(self, v, k=0):
        return self.base[v] if k == 0 else f"{self.base[v]}{self.sep}{k}"

    def family(self, variables, k=0):
        return tuple(self.param(v, k) for v in variables)

    def rf_name(self, k=0):
        return self.rf if k == 0 else f"{self.rf}{self.sep}{k}"


def _ordered_atoms(t, variables):
    """Guards, then atoms on undefined values, then one group per updated variable
    (its primed atoms or its frame equality)."""
    guards = [a for a in t.atoms if not a.has_primed() and not any(is_undef(v) for v in a.variables())]
    undef = [a for a in t.atoms if not a.has_primed() and a not in guards]
    primed = [a for a in t.atoms if a.has_primed()]
    order = {v: i for i, v in enumerate(variables)}
    groups = {v: [] for v in variables}
    for a in primed:
        v = min((unprime(w) for w in a.variables() if is_primed(w)), key=lambda w: order.get(w, len(order)))
        groups.setdefault(v, []).append(a)
    ups = []
    for v in variables:
        ups += groups[v] or [Atom.eq(LinTerm.var(prime(v)) - LinTerm.var(v))]
    return guards, undef, ups


class _Builder:
    def __init__(self, ts):
        self.ts = ts
        self.vars = tuple(ts.variables)
        self.names = _Names(self.vars)
        self.eqs = []

    def _rename(self, atoms, k, locals_):
        m = {}
        for v in self.vars:
            m[v] = self.names.param(v)
            m[prime(v)] = self.names.param(v, k)
        out = []
        for a in atoms:
            for w in sorted(a.variables(), key=lambda w: [x for x, _ in a.lhs.coeffs].index(w)):
                if is_undef(w) and w not in locals_:
                    locals_[w] = f"{self.names.local}{len(locals_) + 1}"
            out.append(a.rename({**m, **locals_}))
        return out

    def _trans_atoms(self, t, k, locals_, frames=True):
        """Renamed atoms of ``t`` with post values in family ``k``; whether the
        post values coincide with the pre values (no update at all)."""
        guards, undef, ups = _ordered_atoms(t, self.vars)
        if not t.updated():
            return self._rename(guards + undef, k, locals_), True
        if not frames:
            ups = [a for a in ups if a in t.atoms]
        return self._rename(guards + undef + ups, k, locals_), False

    def add(self, loc, cost, calls, atoms):
        self.eqs.append(CostEquation(fname(loc), self.names.family(self.vars), cost, tuple(calls), tuple(atoms)))

    def step(self, t, call=True):
        """Equation for a single transition, with or without a call to its target."""
        locals_ = {}
        atoms, same = self._trans_atoms(t, 1, locals_, frames=call)
        calls = []
        if call:
            args = self.names.family(self.vars, 0 if same else 1)
            calls.append((fname(t.target), args))
        self.add(t.source, 1, calls, atoms)

    def cycle(self, t, parts, head):
        locals_ = {}
        j = len(parts)
        size = []
        for i, (loc, trs) in enumerate(parts, start=1):
            rel = size_relations(trs, self.vars, loc)
            m = {}
            for v in self.vars:
                m[v] = self.names.param(v, i)
                m[prime(v)] = self.names.param(v, i + 1)
            size += [a.rename(m) for a in rel.atoms]
        guards, undef, ups = _ordered_atoms(t, self.vars)
        atoms = size + self._rename(guards + undef + ups, 1, locals_)
        calls = [(fname(loc), self.names.family(self.vars, i)) for i, (loc, _) in enumerate(parts, start=1)]
        calls.append((fname(head), self.names.family(self.vars, j + 1)))
        self.add(head, 1, calls, atoms)


def _entry_of(ts, locs, inside) -> str:
    ins = sorted({t.target for t in inside if t.target in locs and t.source not in locs})
    if ins:
        return ins[0]
    return sorted(locs)[0]


def _component(b: _Builder, locs, head, call_free):
    ts = b.ts
    locs = frozenset(locs)
    trs = sorted((t for t in ts.transitions if t.source in locs), key=lambda t: t.id)
    internal = [t for t in trs if t.target in locs]
    if len(locs) == 1:
        for t in trs:
            b.step(t, call=t.target == head or not call_free)
        if not trs and not call_free:
            b.add(head, 1, [], [])
        return
    comp = Component(0, locs, tuple(t.id for t in internal))
    g = component_graph(ts, comp, head)
    for c in cycles_through_entry(ts, comp, head):
        t = ts.transition(c.first)
        parts = []
        for i, loc in zip(c.part_ids, c.parts):
            pl = g.parts[i].locations
            parts.append((loc, [x for x in internal if x.source in pl]))
        b.cycle(t, parts, head)
    for t in trs:
        if t.source == head and t.target not in locs:
            b.step(t, call=not call_free)
    for p in g.parts:
        _component(b, p.locations, _entry_of(ts, p.locations, internal), True)


def generate_crs(ts, loops=None) -> CRS:
    """One equation group per location, following the component structure of ``ts``."""
    b = _Builder(ts)
    heads = {frozenset(l.locations): l.head for l in (loops or [])}
    for comp in reversed(sccs(ts)):
        if comp.trivial:
            _component(b, {next(iter(comp.locations))}, next(iter(comp.locations)), False)
            continue
        head = heads.get(frozenset(comp.locations))
        if head is None:
            ins = {t.target for t in ts.transitions if t.target in comp.locations and t.source not in comp.locations}
            if ts.entry in comp.locations:
                ins.add(ts.entry)
            if len(ins) != 1:
                raise CRSError(f"component {sorted(comp.locations)} has no unique entry location")
            head = ins.pop()
        _component(b, comp.locations, head, False)
    pos = {fname(l): i for i, l in enumerate(ts.locations)}
    eqs = [e for _, e in sorted(enumerate(b.eqs), key=lambda ie: (pos.get(ie[1].head, len(pos)), ie[0]))]
    return CRS(fname(ts.entry), eqs, b.vars, {fname(l): l for l in ts.locations})


def rf_annotation_of(loops) -> dict:
    """Location -> ranking function for every loop head of the annotations."""
    out = {}
    for loop in loops:
        for l in loop.all():
            out[l.head] = l.rf[l.head]
    return out


def embed_ranking_functions(crs: CRS, rf: dict) -> CRS:
    """Give every non-entry function a ranking argument: recursive calls must
    decrease it, calls into annotated functions fix it to the ranking function."""
    if crs.rf_embedded:
        raise CRSError("ranking functions already embedded")
    names = _Names(crs.variables)
    by_fn = {fname(l): t for l, t in rf.items()}
    out = []
    for e in crs.equations:
        params = e.params if e.head == crs.entry else e.params + (names.rf_name(),)
        if e.recursive and e.head not in by_fn:
            raise CRSError(f"recursive function {e.head} has no ranking function")
        atoms = list(e.atoms)
        if e.recursive:
            atoms.append(Atom.compare(LinTerm.var(names.rf_name()), ">=", LinTerm.constant(0)))
        calls = []
        for k, (f, args) in enumerate(e.calls, start=1):
            r = names.rf_name(k)
            calls.append((f, tuple(args) + (r,)))
            if f == e.head:
                atoms.append(Atom.compare(LinTerm.var(r), "<=", LinTerm.var(names.rf_name()) - LinTerm.constant(1)))
            elif f in by_fn:
                term = by_fn[f].rename(dict(zip(crs.variables, args)))
                atoms.append(Atom.compare(LinTerm.var(r), "=", term))
        out.append(CostEquation(e.head, params, e.cost, tuple(calls), tuple(atoms)))
    return replace(crs, equations=out, rf_embedded=True)


def make_conditional(crs: CRS, pre) -> CRS:
    """Prefix the entry with ``ce_<entry>`` whose single equation carries ``pre``."""
    names = _Names(crs.variables)
    loc = crs.functions.get(crs.entry, crs.entry[2:])
    head = "ce_" + re.sub(r"[^A-Za-z0-9_]", "_", loc)
    params = names.family(crs.variables)
    atoms = tuple(a.rename({v: names.param(v) for v in crs.variables}) for a in pre)
    eq = CostEquation(head, params, 1, ((crs.entry, params),), atoms)
    return replace(crs, entry=head, equations=[eq] + list(crs.equations), conditional=True,
                   functions={**crs.functions, head: loc})


# ------------------------------------------------------------------ text form

def format_equation(e: CostEquation) -> str:
    fam = {a for _, args in e.calls for a in args}
    heads = set(e.params)

    def rank(v):
        return 0 if v in fam else 1 if v in heads else 2

    atoms = ", ".join(format_atom(a, le="=<", prefer=rank).replace(" ", "") for a in e.atoms)
    calls = ", ".join(f"{f}({','.join(args)})" for f, args in e.calls)
    return f"eq({e.head}({','.join(e.params)}), {e.cost}, [{calls}], [{atoms}])."


def emit_crs(crs: CRS) -> str:
    lines = [f"entry({crs.entry})."]
    lines += [format_equation(e) for e in crs.equations]
    return "\n".join(lines) + "\n"


def _split_top(s: str) -> list:
    out, depth, cur = [], 0, ""
    for ch in s:
        if ch in "([":
            depth += 1
        elif ch in ")]":
            depth -= 1
        if ch == "," and depth == 0:
            out.append(cur.strip())
            cur = ""
        else:
            cur += ch
    if cur.strip():
        out.append(cur.strip())
    return out


def _call(s: str):
    m = re.fullmatch(r"\s*([A-Za-z_][A-Za-z0-9_]*)\((.*)\)\s*", s)
    if not m:
        raise CRSError(f"malformed call {s!r}")
    args = tuple(a.strip() for a in m.group(2).split(",") if a.strip())
    return m.group(1), args


def parse_crs(text: str) -> CRS:
    entry = None
    eqs = []
    for n, line in enumerate(text.splitlines(), start=1):
        line = line.strip()
        if not line or line.startswith("%"):
            continue
        m = re.fullmatch(r"entry\(([A-Za-z_][A-Za-z0-9_]*)\)\.", line)
        if m:
            entry = m.group(1)
            continue
        m = re.fullmatch(r"eq\((.*)\)\.", line)
        if not m:
            raise CRSError(f"line {n}: expected entry/1 or eq/4")
        parts = _split_top(m.group(1))
        if len(parts) != 4:
            raise CRSError(f"line {n}: eq/4 needs four arguments")
        head, params = _call(parts[0])
        calls = tuple(_call(c) for c in _split_top(parts[2].strip()[1:-1]))
        atoms = tuple(parse_atoms(parts[3].strip()[1:-1], n))
        if not re.fullmatch(r"\s*\d+\s*", parts[1]):
            raise CRSError(f"line {n}: cost must be a nonnegative integer")
        eqs.append(CostEquation(head, params, int(parts[1]), calls, atoms))
    if entry is None:
        raise CRSError("missing entry/1")
    return CRS(entry, eqs)
