"""Upper bounds on the number of transitions, as polynomials in a single magnitude
N bounding the absolute value of every variable at the entry location.

Bounds are tracked per quantity ``(v, +1)`` (upper bound on v) and ``(v, -1)``
(upper bound on -v).  Inside a loop with head ranking function R, entered with
bounds B, the number of iterations is at most ub(R, B) + 1, and every quantity
satisfies  q <= max(B(q), A) + (K + 1) * I  where A collects absolute bounds of
the loop's transitions and I the per-iteration increments.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

from .graph_analysis import sccs
from .its_model import is_primed, prime
from .linear_core import project


class MagnitudePoly:
    """Polynomial in N with nonnegative rational coefficients."""

    __slots__ = ("c",)

    def __init__(self, coeffs=None):
        c = {}
        for d, k in (coeffs or {}).items():
            k = Fraction(k)
            if k < 0:
                raise ValueError("magnitude polynomials have nonnegative coefficients")
            if k:
                c[int(d)] = k
        self.c = c

    @staticmethod
    def const(k) -> "MagnitudePoly":
        return MagnitudePoly({0: k})

    @staticmethod
    def n() -> "MagnitudePoly":
        return MagnitudePoly({1: 1})

    def __add__(self, o):
        out = dict(self.c)
        for d, k in o.c.items():
            out[d] = out.get(d, 0) + k
        return MagnitudePoly(out)

    def __mul__(self, o):
        if not isinstance(o, MagnitudePoly):
            return MagnitudePoly({d: k * Fraction(o) for d, k in self.c.items()})
        out = {}
        for d1, k1 in self.c.items():
            for d2, k2 in o.c.items():
                out[d1 + d2] = out.get(d1 + d2, 0) + k1 * k2
        return MagnitudePoly(out)

    __rmul__ = __mul__

    def join(self, o) -> "MagnitudePoly":
        """Coefficient-wise max: an upper bound of both for N >= 0."""
        return MagnitudePoly({d: max(self.c.get(d, 0), o.c.get(d, 0)) for d in set(self.c) | set(o.c)})

    @property
    def degree(self) -> int:
        return max(self.c, default=0)

    def evaluate(self, n) -> Fraction:
        return sum((k * Fraction(n) ** d for d, k in self.c.items()), Fraction(0))

    def key(self):
        """Asymptotic order: degree first, then coefficients from the top."""
        top = self.degree
        return (top,) + tuple(self.c.get(d, 0) for d in range(top, -1, -1))

    def __eq__(self, o):
        return isinstance(o, MagnitudePoly) and self.c == o.c

    def __hash__(self):
        return hash(tuple(sorted(self.c.items())))

    def __str__(self):
        if not self.c:
            return "0"
        parts = []
        for d in sorted(self.c, reverse=True):
            k = self.c[d]
            ks = str(k)
            if d == 0:
                parts.append(ks)
            else:
                mon = "N" if d == 1 else f"N^{d}"
                parts.append(mon if k == 1 else f"{ks}*{mon}")
        return " + ".join(parts)

    __repr__ = __str__


ZERO = MagnitudePoly()


def _add(a, b):
    return None if a is None or b is None else a + b


def _mul(a, b):
    return None if a is None or b is None else a * b


def _join(a, b):
    return None if a is None or b is None else a.join(b)


def _smaller(a, b):
    if a is None:
        return b
    if b is None:
        return a
    return a if a.key() <= b.key() else b


@dataclass(frozen=True)
class Bound:
    poly: MagnitudePoly | None  # None: no finite bound found
    pre: tuple = ()  # precondition under which the bound holds

    @property
    def finite(self) -> bool:
        return self.poly is not None

    def __str__(self):
        return "unbounded" if self.poly is None else str(self.poly)


def magnitude(init) -> int:
    """N for an initial valuation (mapping) or a plain integer."""
    if isinstance(init, int):
        return max(1, abs(init))
    return max([1] + [abs(int(x)) for x in init.values()])


def eval_bound(b: Bound, init):
    if b.poly is None:
        return math.inf
    return math.ceil(b.poly.evaluate(magnitude(init)))


def asymptotic_degree(b: Bound):
    return math.inf if b.poly is None else b.poly.degree


# ------------------------------------------------------------- candidates

@dataclass(frozen=True)
class _Cand:
    kind: str  # "rel": s*v' <= s*v + term; "abs": s*v' <= term
    term: tuple  # ((var, Fraction), ...), const
    self_ref: bool = False


def _term(d: dict, c) -> tuple:
    return tuple(sorted((v, Fraction(k)) for v, k in d.items() if k)), Fraction(c)


def _dead(atoms) -> bool:
    return any(not a.lhs.coeffs and not a.holds({}) for a in atoms)


def candidates(t, variables, v, s) -> list:
    """Ways to bound ``s * v'`` after transition ``t`` by its pre-state, best first.
    None when ``t`` can never fire."""
    rel = t.relation(variables)
    vp = prime(v)
    allv = {w for a in rel for w in a.variables()}
    pre = {w for w in allv if not is_primed(w) and w in variables}
    out = []
    for keep in (pre, pre - {v}, {v} & pre, set()):
        proj = project(rel, sorted(allv - keep - {vp}))
        if proj is None:
            continue
        if _dead(proj):
            return None
        for a in proj:
            forms = [a.lhs] if a.rel == "<=" else [a.lhs, -a.lhs]
            for lhs in forms:
                k = lhs.coeff(vp) * s
                if k <= 0:
                    continue
                d = {w: Fraction(-c, k) for w, c in lhs.coeffs if w != vp}
                const = Fraction(-lhs.const, k)
                cs = d.pop(v, Fraction(0)) * s
                if cs == 0:
                    c = _Cand("abs", _term(d, const))
                elif 0 < cs <= 1:
                    c = _Cand("rel", _term(d, const))
                else:
                    d[v] = cs * s
                    c = _Cand("abs", _term(d, const), self_ref=True)
                if c not in out:
                    out.append(c)

    def rank(c):
        vs, const = c.term
        if c.kind == "rel" and not vs and const <= 0:
            return (0, 0, const)
        if c.kind == "abs" and not c.self_ref:
            return (1, len(vs), const)
        if c.kind == "rel":
            return (2, len(vs), const)
        return (3, len(vs), const)

    out.sort(key=rank)
    return out


class _Cycle(Exception):
    pass


def ub(term, bounds):
    """Upper bound of a linear term given per-quantity bounds (callable)."""
    vs, const = term
    total = MagnitudePoly.const(max(const, 0))
    for w, k in vs:
        b = bounds((w, 1 if k > 0 else -1))
        if b is None:
            return None
        total = total + b * abs(k)
    return total


# ----------------------------------------------------------------- solver

class _LoopCtx:
    def __init__(self, solver, loop, entry_bounds):
        self.s = solver
        self.loop = loop
        self.bin = entry_bounds
        self.memo = {}
        self.active = set()
        self.hits = 0
        self.kmemo = {}

    def fin(self, q):
        if q in self.memo:
            return self.memo[q]
        if q in self.active:
            self.hits += 1
            raise _Cycle()
        self.active.add(q)
        before = self.hits
        try:
            a, inc = self._effect(self.loop, q, top=True)
            k = self.iterations(self.loop, top=True)
            val = _add(_join(self.bin(q), a), _mul(_add(k, MagnitudePoly.const(1)), inc))
        finally:
            self.active.discard(q)
        if self.hits == before:
            self.memo[q] = val
        return val

    def iterations(self, loop, top=False):
        if loop.head in self.kmemo:
            return self.kmemo[loop.head]
        before = self.hits
        b = ub(self.s.rf_term(loop), self.bin if top else self._safe)
        k = _add(b, MagnitudePoly.const(1))
        if self.hits == before:
            self.kmemo[loop.head] = k
        return k

    def _safe(self, q):
        try:
            return self.fin(q)
        except _Cycle:
            return None

    def _effect(self, loop, q, top=False):
        """(absolute part, per-iteration increment) of ``q`` over one iteration."""
        v, s = q
        a = ZERO
        inc = ZERO
        for t in self.s.body(loop):
            cs = self.s.cands(t, v, s)
            if cs is None:
                continue
            chosen = None
            for c in cs:
                if c.self_ref:
                    continue
                try:
                    val = ub(c.term, self.fin)
                except _Cycle:
                    continue
                if val is not None:
                    chosen = (c.kind, val)
                    break
            if chosen is None:
                return None, None
            if chosen[0] == "abs":
                a = a.join(chosen[1])
            else:
                inc = inc + chosen[1]
        for child in loop.children:
            ca, cinc = self._effect(child, q)
            if ca is None or cinc is None:
                return None, None
            a = a.join(ca)
            if cinc == ZERO:
                continue
            kc = self.iterations(child)
            if kc is None:
                return None, None
            inc = inc + (kc + MagnitudePoly.const(1)) * cinc
        return a, inc

    def cost(self, loop, top=False):
        k = self.iterations(loop, top)
        if k is None:
            return None
        inner = {l for c in loop.children for l in c.locations}
        per = MagnitudePoly.const(1 + len(loop.locations - inner - {loop.head}))
        for c in loop.children:
            cc = self.cost(c)
            if cc is None:
                return None
            per = per + cc
        return (k + MagnitudePoly.const(1)) * per + MagnitudePoly.const(1)


class Solver:
    def __init__(self, ts, loops):
        self.ts = ts
        self.vars = tuple(ts.variables)
        self.loops = {frozenset(l.locations): l for l in loops}
        self.byid = ts.by_id()
        self._cands = {}

    def cands(self, t, v, s):
        key = (t.id, v, s)
        if key not in self._cands:
            self._cands[key] = candidates(t, self.vars, v, s)
        return self._cands[key]

    def body(self, loop):
        inner = {i for c in loop.children for i in c.transitions}
        return [self.byid[i] for i in loop.transitions if i not in inner]

    def rf_term(self, loop):
        r = loop.rf[loop.head]
        return _term({v: k for v, k in r.coeffs}, r.const)

    def post(self, t, q, pre):
        """Bound on quantity ``q`` after ``t`` given pre-state bounds ``pre``."""
        v, s = q
        cs = self.cands(t, v, s)
        if cs is None:
            return ZERO
        best = None
        found = False
        for c in cs:
            b = ub(c.term, pre)
            if c.kind == "rel":
                b = _add(b, pre(q))
            if b is not None:
                best = b if not found else _smaller(best, b)
                found = True
        return best if found else None

    def solve(self) -> MagnitudePoly | None:
        quantities = [(v, s) for v in self.vars for s in (1, -1)]
        comps = list(reversed(sccs(self.ts)))  # topological
        comp_of = {l: i for i, c in enumerate(comps) for l in c.locations}
        entry_b = {}
        total = ZERO
        n = MagnitudePoly.n()
        for i, comp in enumerate(comps):
            if self.ts.entry in comp.locations:
                bin_ = {q: n for q in quantities}
            else:
                bin_ = entry_b.get(i)
                if bin_ is None:
                    continue  # unreachable
            if comp.trivial:
                fin = dict(bin_)
                outs = [t for t in self.ts.transitions if t.source in comp.locations]
                total = total + MagnitudePoly.const(1 if outs else 0)
            else:
                loop = self.loops.get(frozenset(comp.locations))
                if loop is None:
                    return None
                ctx = _LoopCtx(self, loop, lambda q, b=bin_: b[q])
                c = ctx.cost(loop, top=True)
                if c is None:
                    return None
                total = total + c
                fin = {q: ctx._safe(q) for q in quantities}
            for t in self.ts.transitions:
                if t.source not in comp.locations or t.target in comp.locations:
                    continue
                j = comp_of[t.target]
                post = {q: self.post(t, q, lambda x: fin[x]) for q in quantities}
                if j in entry_b:
                    entry_b[j] = {q: _join(entry_b[j][q], post[q]) for q in quantities}
                else:
                    entry_b[j] = post
        return total


def solve(ts, loops, pre=()) -> Bound:
    """Bound on the number of transitions of any run of the loop-nested ``ts``
    from its entry location, with every initial |v| <= N."""
    return Bound(Solver(ts, loops).solve(), tuple(pre))
