"""Linear ranking functions via Farkas' lemma, candidate conditional invariants,
lexicographic phase-level proofs, their verifier, and the phase unfolding."""
from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from math import gcd, lcm

from .graph_analysis import sccs, sccs_of
from .its_model import Atom, LinTerm, Transition, is_undef, prime
from .linear_core import Polyhedron, entails_atom, feasible_point, satisfiable


class UnfoldRefused(ValueError):
    pass


@dataclass
class TerminationProof:
    locations: frozenset
    transitions: tuple  # ids of the component
    rf: dict  # location -> LinTerm
    inv: dict  # location -> tuple of Atoms (own conditional invariant, empty = true)
    strict: frozenset
    removed: frozenset  # strict | dead | no-SCC
    children: tuple = ()
    dead: frozenset = frozenset()

    def size(self) -> int:
        return 1 + sum(c.size() for c in self.children)

    def depth(self) -> int:
        return 1 + max((c.depth() for c in self.children), default=0)

    def subproofs(self):
        yield self
        for c in self.children:
            yield from c.subproofs()


@dataclass
class PhaseResult:
    unfolded: object  # TransitionSystem
    proofs: dict  # frozenset(locations) -> TerminationProof
    pre: tuple = ()
    status: str = "proved"  # proved | conditional | failed
    failed: list = field(default_factory=list)


def _ctx(context, loc) -> list:
    return list((context or {}).get(loc, ()))


def _conj(a: dict, b: dict) -> dict:
    out = {l: tuple(v) for l, v in (a or {}).items()}
    for l, v in (b or {}).items():
        out[l] = tuple(out.get(l, ())) + tuple(x for x in v if x not in out.get(l, ()))
    return out


def _prime_atoms(atoms, only=None):
    out = []
    for a in atoms:
        ren = {v: prime(v) for v in a.variables() if not is_undef(v) and (only is None or v in only)}
        out.append(a.rename(ren))
    return out


def _relation(t: Transition, variables, context) -> list:
    return t.relation(variables) + _ctx(context, t.source)


# ------------------------------------------------------------ synthesis

class _Farkas:
    """Template unknowns and Farkas multipliers for one component."""

    def __init__(self, transitions, variables, context):
        self.vars = list(variables)
        self.ts = transitions
        locs = []
        for t in transitions:
            for l in (t.source, t.target):
                if l not in locs:
                    locs.append(l)
        self.locs = locs
        self.tidx = {}
        n = 0
        for l in locs:
            for v in self.vars + [None]:
                self.tidx[(l, v)] = n
                n += 1
        self.ntemplate = n
        self.polys = {}
        self.upd = {}
        for t in transitions:
            # frame equalities are folded into the template equations instead of
            # becoming rows: an untouched v stands for both v and v'
            atoms = list(t.atoms) + _ctx(context, t.source)
            upd = t.updated() & set(self.vars)
            cols = set(self.vars) | {prime(v) for v in upd}
            for a in atoms:
                cols |= a.variables()
            self.upd[t.id] = upd
            self.polys[t.id] = Polyhedron.from_atoms(atoms, sorted(cols))

    def solve(self, strict, fixed=()):
        """Template values making every transition non-increasing and the ``strict``
        ones bounded and decreasing by at least one; ``fixed`` pins template entries
        to zero."""
        blocks = []
        nvar = self.ntemplate
        for t in self.ts:
            kinds = ["bounded", "strict"] if t.id in strict else ["noninc"]
            for k in kinds:
                blocks.append((t, k, nvar))
                nvar += len(self.polys[t.id].rows)
        eq, le = [], []

        def row():
            return [0] * nvar

        for t, kind, off in blocks:
            p = self.polys[t.id]
            m = len(p.rows)
            col = {c: j for j, c in enumerate(p.columns)}
            for c in p.columns:
                r = row()
                j = col[c]
                for i in range(m):
                    r[off + i] = p.rows[i][0][j]
                # lambda . A_c - f_c(template) = 0
                if c in self.vars:
                    r[self.tidx[(t.source, c)]] += 1
                    if c not in self.upd[t.id] and kind != "bounded":
                        r[self.tidx[(t.target, c)]] -= 1
                elif c.endswith("'") and c[:-1] in self.vars and kind != "bounded":
                    r[self.tidx[(t.target, c[:-1])]] -= 1
                eq.append((r, 0))
            r = row()
            for i in range(m):
                r[off + i] = p.rows[i][1]
            r[self.tidx[(t.source, None)]] -= 1
            if kind == "bounded":
                le.append((r, 0))
            else:
                r[self.tidx[(t.target, None)]] += 1
                le.append((r, -1 if kind == "strict" else 0))
        for key in fixed:
            r = row()
            r[self.tidx[key]] = 1
            eq.append((r, 0))
        x = feasible_point(nvar, eq, le, range(self.ntemplate, nvar))
        if x is None:
            return None
        return x[:self.ntemplate]

    def rf(self, values) -> dict:
        den = 1
        for v in values:
            den = lcm(den, Fraction(v).denominator)
        ints = [int(Fraction(v) * den) for v in values]
        g = 0
        for v in ints:
            g = gcd(g, v)
        g = g or 1
        out = {}
        for l in self.locs:
            coeffs = {v: ints[self.tidx[(l, v)]] // g for v in self.vars}
            out[l] = LinTerm.of(coeffs, ints[self.tidx[(l, None)]] // g)
        return out


def synthesize_lrf(transitions, variables, context=None, avoid=()):
    """Linear RF over ``transitions`` (each conjoined with ``context`` at its source).

    Candidates for strictness are tried in id order; once one works the others are
    added greedily when a common RF exists.  The template is then simplified by
    pinning constants and coefficients to zero where that stays feasible.  Variables
    in ``avoid`` get zero coefficients.  Returns (rf, strict ids) or None."""
    transitions = sorted(transitions, key=lambda t: t.id)
    if not transitions:
        return None
    f = _Farkas(transitions, variables, context)
    pin = [(l, v) for l in f.locs for v in f.vars if v in set(avoid)]
    strict = None
    for t in transitions:
        if f.solve({t.id}, pin) is not None:
            strict = {t.id}
            break
    if strict is None:
        return None
    for t in transitions:
        if t.id not in strict and f.solve(strict | {t.id}, pin) is not None:
            strict.add(t.id)
    return _simplified(f, strict, pin), frozenset(strict)


def _simplified(f: "_Farkas", strict, pin=()) -> dict:
    fixed = list(pin)
    order = [(l, None) for l in f.locs] + [(l, v) for l in f.locs for v in f.vars]
    for key in order:
        if f.solve(strict, fixed + [key]) is not None:
            fixed.append(key)
    return f.rf(f.solve(strict, fixed))


def rf_for_strict(transitions, variables, strict, context=None):
    """An RF making exactly the given transitions strict (others non-increasing), or None."""
    transitions = sorted(transitions, key=lambda t: t.id)
    if not transitions:
        return None
    f = _Farkas(transitions, variables, context)
    if f.solve(set(strict)) is None:
        return None
    return _simplified(f, set(strict))


def _compose_feasible(t1: Transition, t2: Transition, variables, context) -> bool:
    mid = {prime(v): v + "·m" for v in variables}
    first = [a.rename(mid) for a in t1.relation(variables)] + _ctx(context, t1.source)
    ren = {v: v + "·m" for v in variables}
    ren.update({u: u + "·b" for u in t2.undefs()})
    second = [a.rename(ren) for a in t2.relation(variables) + _ctx(context, t2.source)]
    return satisfiable(first + second)


def dead_ends(transitions, variables, context=None) -> frozenset:
    """Transitions after which no transition of the set can follow (greatest fixpoint)."""
    live = list(transitions)
    dead = set()
    changed = True
    while changed:
        changed = False
        for t in live:
            succ = [u for u in live if u.source == t.target]
            if not any(_compose_feasible(t, u, variables, context) for u in succ):
                dead.add(t.id)
                live.remove(t)
                changed = True
                break
    return frozenset(dead)


# ------------------------------------------------------------ invariants

def _inductive(q_atoms, transitions, variables, context) -> bool:
    for t in transitions:
        base = _relation(t, variables, context) + list(q_atoms)
        for g in _prime_atoms(q_atoms):
            if not entails_atom(base, g):
                return False
    return True


def candidate_invariants(transitions, variables, context=None) -> list:
    """Uniform candidate invariants that are inductive, non-trivial and keep some
    transition enabled, in a fixed order."""
    transitions = sorted(transitions, key=lambda t: t.id)
    locs = sorted({l for t in transitions for l in (t.source, t.target)})
    used = set()
    guards = []
    for t in transitions:
        for a in t.atoms:
            used |= {v for v in a.variables() if not is_undef(v)}
            if not a.has_primed() and not any(is_undef(v) for v in a.variables()):
                if a not in guards:
                    guards.append(a)
    used = {v.rstrip("'") for v in used}
    pool = []
    for v in variables:
        if v not in used:
            continue
        x = LinTerm.var(v)
        for c in (1, 0, -1):
            pool.append(Atom.compare(x, "<=", LinTerm.constant(c)))
        for c in (-1, 0, 1):
            pool.append(Atom.compare(x, ">=", LinTerm.constant(c)))
    for a in guards:
        pool.append(a)
        neg = a.negate()
        if len(neg) == 1:
            pool.append(neg[0])
    out = []
    seen = set()
    for a in pool:
        if a in seen:
            continue
        seen.add(a)
        if not any(satisfiable(_relation(t, variables, context) + [a]) for t in transitions):
            continue
        if all(entails_atom(_relation(t, variables, context), a) for t in transitions):
            continue
        if _inductive([a], transitions, variables, context):
            out.append({l: (a,) for l in locs})
    return out


# ------------------------------------------------------------ proofs

def _zero_rf(locs) -> dict:
    return {l: LinTerm() for l in locs}


def _prove(transitions, variables, context, depth=0, avoid=()):
    if depth > 32:
        return None
    transitions = sorted(transitions, key=lambda t: t.id)
    locs = frozenset(l for t in transitions for l in (t.source, t.target))
    ids = tuple(t.id for t in transitions)
    feas = [t for t in transitions if satisfiable(_relation(t, variables, context))]
    if not any(not c.trivial for c in sccs_of(sorted(locs), feas)):
        return TerminationProof(locs, ids, _zero_rf(locs), {}, frozenset(), frozenset(ids))
    res = None
    if avoid:
        res = synthesize_lrf(feas, variables, context, avoid)
    if res is None:
        res = synthesize_lrf(feas, variables, context)
    dead = frozenset()
    if res is None:
        dead = dead_ends(feas, variables, context)
        if not dead:
            return None
        rf, strict = _zero_rf(locs), frozenset()
    else:
        rf, strict = res
    rest = [t for t in feas if t.id not in strict and t.id not in dead]
    subs = [c for c in sccs_of(sorted(locs), rest) if not c.trivial]
    inner = {i for c in subs for i in c.transitions}
    children = []
    byid = {t.id: t for t in transitions}
    for c in sorted(subs, key=lambda c: min(c.transitions)):
        child = _prove([byid[i] for i in c.transitions], variables, context, depth + 1, avoid)
        if child is None:
            return None
        children.append(child)
    removed = frozenset(ids) - inner
    return TerminationProof(locs, ids, rf, {}, strict, removed, tuple(children), dead)


def prove_component(transitions, variables, context=None, conditional=True, avoid=()):
    """Proof of the component formed by ``transitions``; returns (proof, Q) where Q is
    the conditional invariant used (empty dict when unconditional), or None.  Ranking
    functions avoid the variables in ``avoid`` whenever possible."""
    p = _prove(transitions, variables, context, avoid=avoid)
    if p is not None:
        return p, {}
    if not conditional:
        return None
    for q in candidate_invariants(transitions, variables, context):
        p = _prove(transitions, variables, _conj(context, q))
        if p is not None:
            p.inv = q
            return p, q
    return None


def verify_proof(proof: TerminationProof, transitions, variables, context=None) -> list:
    """Independent re-check of every proof obligation; returns a list of problems."""
    problems = []
    byid = {t.id: t for t in transitions}
    ids = set(proof.transitions)
    if ids != set(byid):
        problems.append("proof transitions differ from component")
        return problems
    ctx = _conj(context, proof.inv)
    if proof.inv and not _inductive_map(proof.inv, transitions, variables, context):
        problems.append("invariant not inductive")
    if not proof.strict <= proof.removed:
        problems.append("strict not included in removed")
    for t in transitions:
        rel = _relation(t, variables, ctx)
        if not satisfiable(rel):
            continue
        rs = proof.rf.get(t.source, LinTerm())
        rt = proof.rf.get(t.target, LinTerm()).primed()
        if not entails_atom(rel, Atom.compare(rt, "<=", rs)):
            problems.append(f"transition {t.id} increases the ranking function")
        if t.id in proof.strict:
            if not entails_atom(rel, Atom.compare(rs, ">=", LinTerm())):
                problems.append(f"transition {t.id} unbounded")
            if not entails_atom(rel, Atom.compare(rt + LinTerm.constant(1), "<=", rs)):
                problems.append(f"transition {t.id} not strictly decreasing")
    for tid in proof.dead:
        t = byid[tid]
        if any(_compose_feasible(t, u, variables, ctx) for u in transitions
               if u.source == t.target and u.id not in proof.dead):
            problems.append(f"transition {tid} is not a dead end")
    rest = [t for t in transitions if t.id not in proof.strict and t.id not in proof.dead
            and satisfiable(_relation(t, variables, ctx))]
    locs = sorted({l for t in transitions for l in (t.source, t.target)})
    subs = {frozenset(c.transitions) for c in sccs_of(locs, rest) if not c.trivial}
    kids = {frozenset(c.transitions) for c in proof.children}
    if subs != kids:
        problems.append("children do not match the residual SCCs")
    if set(proof.removed) | {i for c in proof.children for i in c.transitions} != ids:
        problems.append("removed and children do not cover the component")
    if not proof.removed:
        problems.append("no progress")
    for c in proof.children:
        problems += verify_proof(c, [byid[i] for i in c.transitions], variables, ctx)
    return problems


def _inductive_map(q: dict, transitions, variables, context) -> bool:
    for t in transitions:
        base = _relation(t, variables, context) + list(q.get(t.source, ()))
        for g in _prime_atoms(q.get(t.target, ())):
            if not entails_atom(base, g):
                return False
    return True


def rf_annotation(proof: TerminationProof) -> dict:
    """The top-level ranking function of a proof."""
    return dict(proof.rf)


# ------------------------------------------------------------ unfolding

def _negation(atoms, limit=8) -> list:
    out = []
    for a in atoms:
        out += a.negate()
    if len(out) > limit:
        raise UnfoldRefused(f"negated invariant has {len(out)} disjuncts (limit {limit})")
    return out


def _fresh_undefs(t_atoms, tag):
    us = []
    for a in t_atoms:
        for v, _ in a.lhs.coeffs:
            if is_undef(v) and v not in us:
                us.append(v)
    ren = {u: f"{u}{tag}" for u in us}
    return [a.rename(ren) for a in t_atoms]


def hat_name(loc: str, taken) -> str:
    name = f"{loc}_hat"
    k = 2
    while name in taken:
        name = f"{loc}_hat{k}"
        k += 1
    return name


def unfold(ts, comp, q: dict):
    """Phase unfolding of component ``comp`` of ``ts`` under invariant ``q``.

    Returns (unfolded system, hat map).  Transitions made infeasible by the
    strengthening are dropped."""
    locs = comp.locations
    internal = set(comp.transitions)
    taken = set(ts.locations)
    hat = {}
    for l in ts.locations:
        if l in locs:
            hat[l] = hat_name(l, taken)
            taken.add(hat[l])
    out = []
    vs = ts.variables

    def add(src, dst, atoms):
        atoms = list(dict.fromkeys(atoms))
        if satisfiable(Transition(0, src, dst, tuple(atoms)).relation(vs)):
            out.append(Transition(len(out), src, dst, tuple(atoms)))

    for t in sorted(ts.transitions, key=lambda t: t.id):
        s_in, t_in = t.source in locs, t.target in locs
        if t.id in internal:
            qs = list(q.get(t.source, ()))
            for d in _negation(qs):
                add(t.source, t.target, list(t.atoms) + [d])
            add(hat[t.source], hat[t.target], list(t.atoms) + qs)
        elif t_in and not s_in:
            qt = _prime_atoms(q.get(t.target, ()), only=t.updated())
            for d in _negation(qt):
                add(t.source, t.target, list(t.atoms) + [d])
            add(t.source, hat[t.target], list(t.atoms) + qt)
        elif s_in and not t_in:
            add(t.source, t.target, t.atoms)
            add(hat[t.source], t.target, _fresh_undefs(t.atoms, "h"))
        else:
            add(t.source, t.target, t.atoms)
    for l in ts.locations:
        if l in locs and any(ts.transition(i).source == l for i in internal):
            add(l, hat[l], list(q.get(l, ())))
    used = {x for t in out for x in (t.source, t.target)}
    new_locs = []
    for l in ts.locations:
        new_locs.append(l)
        if l in hat and hat[l] in used:
            new_locs.append(hat[l])
    prov = dict(ts.provenance)
    for l, h in hat.items():
        if h in used:
            prov[h] = f"hat-of {l}"
    res = ts.replace(transitions=tuple(out), locations=tuple(new_locs), provenance=prov)
    return res.canonical(), hat


# ------------------------------------------------------------ analysis

def _comp_transitions(ts, comp):
    byid = ts.by_id()
    return [byid[i] for i in comp.transitions]


def analyze(ts, cap: int = 8) -> PhaseResult:
    """Prove every non-trivial SCC, unfolding on conditional proofs.  Unprovable
    residual phases entered straight from the entry location become a precondition."""
    cur = ts
    pre: list = []
    phase_of: dict = {}  # un-hatted location -> invariant whose negation guards it
    rounds = 0
    while True:
        proofs = {}
        restart = False
        for comp in sccs(cur):
            if comp.trivial:
                continue
            trs = _comp_transitions(cur, comp)
            res = prove_component(trs, cur.variables, conditional=rounds < cap)
            if res is not None and not res[1]:
                proofs[comp.locations] = res[0]
                continue
            if res is not None:
                rounds += 1
                if rounds > cap:
                    return PhaseResult(cur, proofs, tuple(pre), "failed", [comp.locations])
                try:
                    cur, hat = unfold(cur, comp, res[1])
                except UnfoldRefused:
                    return PhaseResult(cur, proofs, tuple(pre), "failed", [comp.locations])
                for l in comp.locations:
                    phase_of[l] = tuple(res[1].get(l, ()))
                restart = True
                break
            cond = _precondition(cur, comp, phase_of)
            if cond is None:
                return PhaseResult(cur, proofs, tuple(pre), "failed", [comp.locations])
            for a in cond:
                if a not in pre:
                    pre.append(a)
            cur = _drop(cur, comp.locations)
            restart = True
            break
        if not restart:
            return PhaseResult(cur, proofs, tuple(pre), "conditional" if pre else "proved")


def _precondition(ts, comp, phase_of):
    """Precondition excluding an unprovable un-hatted phase, or None."""
    if not all(l in phase_of and phase_of[l] for l in comp.locations):
        return None
    entries = [t for t in ts.transitions if t.target in comp.locations and t.source not in comp.locations]
    if any(t.target == ts.entry for t in ts.transitions):
        return None
    cond = []
    for t in entries:
        if t.source != ts.entry:
            return None
        q = phase_of[t.target]
        if any(v in t.updated() for a in q for v in a.variables()):
            return None
        cond += [a for a in q if a not in cond]
    for t in entries:
        if satisfiable(t.relation(ts.variables) + cond):
            return None
    return cond


def _drop(ts, locs):
    keep = tuple(t for t in ts.transitions if t.source not in locs and t.target not in locs)
    return ts.replace(transitions=keep, locations=tuple(l for l in ts.locations if l not in locs)).canonical()
