"""Relations between the values entering a sub-component at its entry location
and the values it leaves with."""
from __future__ import annotations

from dataclasses import dataclass

from .its_model import Atom, LinTerm, is_primed, is_undef, prime
from .linear_core import entails_atom, project


@dataclass(frozen=True)
class SizeRelation:
    entry: str
    atoms: tuple  # v' = v, v' >= v, v' <= v
    growth: tuple = ()  # per-transition facts v' <= v + g

    def all_atoms(self) -> tuple:
        return self.atoms + self.growth


def _classify(v, relations):
    x, xp = LinTerm.var(v), LinTerm.var(prime(v))
    eq = Atom.compare(xp, "=", x)
    if all(entails_atom(r, eq) for r in relations):
        return eq
    ge = Atom.compare(xp, ">=", x)
    if all(entails_atom(r, ge) for r in relations):
        return ge
    le = Atom.compare(xp, "<=", x)
    if all(entails_atom(r, le) for r in relations):
        return le
    return None


def _growth_candidates(v, relations):
    """Terms g (over unprimed variables other than ``v``) with ``v' <= v + g``
    appearing in some transition's projected relation, constants first."""
    vp = prime(v)
    out = []
    for rel in relations:
        keep = {vp} | {w for a in rel for w in a.variables() if not is_primed(w) and not is_undef(w)}
        elim = sorted({w for a in rel for w in a.variables()} - keep)
        proj = project(rel, elim) or []
        for a in proj:
            c = a.lhs.coeff(vp)
            forms = [a.lhs] if a.rel == "<=" else [a.lhs, -a.lhs]
            for t in forms:
                c = t.coeff(vp)
                if c <= 0:
                    continue
                rest = t - LinTerm.var(vp, c)
                if any(k % c for _, k in rest.coeffs) or rest.const % c:
                    continue
                bound = LinTerm.of({w: -k // c for w, k in rest.coeffs}, -rest.const // c)
                if bound.coeff(v) != 1:
                    continue
                g = bound - LinTerm.var(v)
                if g not in out:
                    out.append(g)
    out.sort(key=lambda g: (len(g.coeffs), g.const, str(g)))
    return out


def size_relations(transitions, variables, entry: str) -> SizeRelation:
    """Per-variable equality/monotonicity facts entailed by every transition of the
    sub-component (and so by any path through it), plus linear growth facts."""
    relations = [t.relation(variables) for t in transitions]
    atoms, growth = [], []
    for v in variables:
        a = _classify(v, relations) if relations else Atom.compare(LinTerm.var(prime(v)), "=", LinTerm.var(v))
        if a is not None:
            atoms.append(a)
        if not relations or (a is not None and a.rel == "=") or (a is not None and a.lhs.coeff(prime(v)) > 0):
            continue
        for g in _growth_candidates(v, relations):
            fact = Atom.compare(LinTerm.var(prime(v)), "<=", LinTerm.var(v) + g)
            if all(entails_atom(r, fact) for r in relations):
                growth.append(fact)
                break
    return SizeRelation(entry, tuple(atoms), tuple(growth))
