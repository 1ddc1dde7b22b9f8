"""Exact rational LP feasibility, Farkas certificates, entailment and
Fourier-Motzkin projection."""
from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Sequence

from .its_model import Atom, LinTerm


class DimensionError(ValueError):
    pass


@dataclass(frozen=True)
class Polyhedron:
    """``{x : row . x <= const}`` over the named ``columns``."""

    columns: tuple
    rows: tuple  # of (coeff tuple, const)

    def __post_init__(self):
        n = len(self.columns)
        for coeffs, _ in self.rows:
            if len(coeffs) != n:
                raise DimensionError(f"row has {len(coeffs)} coefficients, expected {n}")

    @staticmethod
    def from_terms(terms: Iterable[LinTerm], columns: Sequence[str] | None = None) -> "Polyhedron":
        """Each term ``t`` contributes the row ``t <= 0``."""
        terms = list(terms)
        if columns is None:
            columns = sorted({v for t in terms for v in t.variables()})
        idx = {v: i for i, v in enumerate(columns)}
        rows = []
        for t in terms:
            c = [0] * len(columns)
            for v, k in t.coeffs:
                if v not in idx:
                    raise DimensionError(f"variable {v!r} not among columns")
                c[idx[v]] = k
            rows.append((tuple(c), -t.const))
        return Polyhedron(tuple(columns), tuple(rows))

    @staticmethod
    def from_atoms(atoms: Iterable[Atom], columns: Sequence[str] | None = None) -> "Polyhedron":
        return Polyhedron.from_terms([r for a in atoms for r in a.rows()], columns)

    def add(self, coeffs, const) -> "Polyhedron":
        return Polyhedron(self.columns, self.rows + ((tuple(coeffs), const),))

    def row_for(self, term: LinTerm):
        """``term <= 0`` as a (coeffs, const) row over this polyhedron's columns."""
        idx = {v: i for i, v in enumerate(self.columns)}
        c = [0] * len(self.columns)
        for v, k in term.coeffs:
            if v not in idx:
                raise DimensionError(f"variable {v!r} not among columns")
            c[idx[v]] = k
        return tuple(c), -term.const


@dataclass(frozen=True)
class LpOutcome:
    feasible: bool
    witness: tuple | None = None
    certificate: tuple | None = None


# ----------------------------------------------------------------- simplex

def _int_row(values) -> list:
    """Scale a row of rationals to coprime integers (positive factor)."""
    den = 1
    for x in values:
        if not isinstance(x, int):
            d = x.denominator
            den = den * d // math.gcd(den, d)
    if den == 1:
        return [int(x) for x in values]
    return [int(x * den) for x in values]


def _reduce(row) -> list:
    g = 0
    for x in row:
        if x:
            g = math.gcd(g, x)
            if g == 1:
                return row
    return [x // g for x in row] if g > 1 else row


def _phase1(A: list, b: list, ncols: int):
    """Feasible point of ``{A z = b, z >= 0}`` or None (Bland's rule, exact).

    Rows are kept fraction-free: row i stands for ``row . z = rhs`` scaled by a
    positive factor, so the basic variable of a row has a positive coefficient
    and its value is rhs / coefficient."""
    m = len(A)
    if m == 0:
        return [Fraction(0)] * ncols
    T = []
    for i in range(m):
        row = _int_row(list(A[i]) + [0] * m + [b[i]])
        if row[-1] < 0:
            row = [-x for x in row]
        T.append(row)
    width = ncols + m
    basis = [None] * m
    # crash basis: an original column that is a positive unit vector (typically a
    # slack) starts basic in its row, and that row needs no artificial
    for j in range(ncols):
        nz = [i for i in range(m) if T[i][j]]
        if len(nz) == 1 and T[nz[0]][j] > 0 and basis[nz[0]] is None:
            basis[nz[0]] = j
    for i in range(m):
        if basis[i] is None:
            basis[i] = ncols + i
            T[i][ncols + i] = 1
    # objective: minimize the sum of artificials => reduced costs = -sum of their rows
    obj = [0] * (width + 1)
    for i in range(m):
        if basis[i] < ncols:
            continue
        row = T[i]
        for j in range(ncols):
            if row[j]:
                obj[j] -= row[j]
        obj[-1] -= row[-1]
    while True:
        enter = next((j for j in range(width) if obj[j] < 0), None)
        if enter is None:
            break
        best = None
        for i in range(m):
            a = T[i][enter]
            if a > 0:
                if best is None:
                    best = i
                    continue
                lhs = T[i][-1] * T[best][enter]
                rhs = T[best][-1] * a
                if lhs < rhs or (lhs == rhs and basis[i] < basis[best]):
                    best = i
        if best is None:  # unbounded; cannot happen in phase 1
            break
        r = best
        prow = T[r]
        p = prow[enter]
        nz = [j for j, x in enumerate(prow) if x]
        for i in range(m):
            if i != r:
                f = T[i][enter]
                if f:
                    row = T[i]
                    for j in range(width + 1):
                        row[j] *= p
                    for j in nz:
                        row[j] -= f * prow[j]
                    T[i] = _reduce(row)
        f = obj[enter]
        if f:
            for j in range(width + 1):
                obj[j] *= p
            for j in nz:
                obj[j] -= f * prow[j]
            obj = _reduce(obj)
        basis[r] = enter
    if obj[-1] != 0:
        return None
    z = [Fraction(0)] * ncols
    for i, bv in enumerate(basis):
        if bv < ncols:
            z[bv] = Fraction(T[i][-1], T[i][bv])
    return z


def feasible_point(nvars: int, eq_rows=(), le_rows=(), nonneg: Iterable[int] = ()):
    """A rational point with ``a.x = c`` for eq rows, ``a.x <= c`` for le rows and the
    listed coordinates nonnegative, or None."""
    nonneg = set(nonneg)
    # column layout: nonneg vars once, free vars as (plus, minus), one slack per le row
    col_of = {}
    ncols = 0
    for j in range(nvars):
        col_of[j] = ncols
        ncols += 1 if j in nonneg else 2
    nslack = len(le_rows)
    total = ncols + nslack
    A, b = [], []
    for k, (coeffs, const) in enumerate(list(eq_rows) + list(le_rows)):
        if len(coeffs) != nvars:
            raise DimensionError("row width does not match variable count")
        row = [0] * total
        for j, a in enumerate(coeffs):
            if a:
                row[col_of[j]] = a
                if j not in nonneg:
                    row[col_of[j] + 1] = -a
        if k >= len(eq_rows):
            row[ncols + k - len(eq_rows)] = 1
        A.append(row)
        b.append(const)
    z = _phase1(A, b, total)
    if z is None:
        return None
    x = []
    for j in range(nvars):
        c = col_of[j]
        x.append(z[c] if j in nonneg else z[c] - z[c + 1])
    return x


def lp_feasible(p: Polyhedron) -> LpOutcome:
    n, m = len(p.columns), len(p.rows)
    x = feasible_point(n, (), p.rows)
    if x is not None:
        return LpOutcome(True, witness=tuple(x))
    # Farkas: lambda >= 0, lambda A = 0, lambda b = -1
    eq = [(tuple(p.rows[i][0][j] for i in range(m)), 0) for j in range(n)]
    eq.append((tuple(p.rows[i][1] for i in range(m)), -1))
    lam = feasible_point(m, eq, (), range(m))
    if lam is None:  # pragma: no cover - contradicts Farkas' lemma
        raise AssertionError("neither witness nor certificate found")
    return LpOutcome(False, certificate=tuple(lam))


def check_witness(p: Polyhedron, x) -> bool:
    return all(sum(Fraction(a) * v for a, v in zip(c, x)) <= d for c, d in p.rows)


def check_certificate(p: Polyhedron, lam) -> bool:
    if any(l < 0 for l in lam) or len(lam) != len(p.rows):
        return False
    for j in range(len(p.columns)):
        if sum(l * p.rows[i][0][j] for i, l in enumerate(lam)) != 0:
            return False
    return sum(l * p.rows[i][1] for i, l in enumerate(lam)) < 0


def entails(p: Polyhedron, row) -> bool:
    """Whether every rational point of ``p`` satisfies ``coeffs . x <= const``."""
    coeffs, const = row
    n, m = len(p.columns), len(p.rows)
    if len(coeffs) != n:
        raise DimensionError("row width does not match polyhedron")
    eq = [(tuple(p.rows[i][0][j] for i in range(m)), coeffs[j]) for j in range(n)]
    le = [(tuple(p.rows[i][1] for i in range(m)), const)]
    if feasible_point(m, eq, le, range(m)) is not None:
        return True
    return not lp_feasible(p).feasible


def _columns(atoms, extra=()):
    cols = set()
    for a in atoms:
        cols |= a.variables()
    for t in extra:
        cols |= t.variables()
    return sorted(cols)


def _substitute_equalities(atoms):
    """Eliminate variables through the equalities (exact over the rationals).
    Returns the remaining ``<=`` rows as (coeff dict, const) meaning
    ``sum + const <= 0``, or None when some equality is contradictory."""
    eqs, les = [], []
    for a in atoms:
        d = {v: Fraction(k) for v, k in a.lhs.coeffs}
        (eqs if a.rel == "=" else les).append((d, Fraction(a.lhs.const)))
    while eqs:
        d, c = eqs.pop()
        if not d:
            if c != 0:
                return None
            continue
        x, k = min(d.items())
        rest = [(v, a) for v, a in d.items() if v != x]

        def sub(row):
            rd, rc = row
            f = rd.get(x)
            if not f:
                return row
            nd = dict(rd)
            del nd[x]
            for v, a in rest:
                nv = nd.get(v, 0) - f * a / k
                if nv:
                    nd[v] = nv
                else:
                    nd.pop(v, None)
            return nd, rc - f * c / k

        eqs = [sub(r) for r in eqs]
        les = [sub(r) for r in les]
    return les


def satisfiable(atoms: Iterable[Atom]) -> bool:
    # no certificate needed, so equalities are substituted away and phase 1 decides
    les = _substitute_equalities(list(atoms))
    if les is None:
        return False
    rows = []
    for d, c in les:
        if not d:
            if c > 0:
                return False
            continue
        rows.append((d, c))
    if not rows:
        return True
    cols = sorted({v for d, _ in rows for v in d})
    idx = {v: i for i, v in enumerate(cols)}
    le_rows = []
    for d, c in rows:
        row = [0] * len(cols)
        for v, k in d.items():
            row[idx[v]] = k
        le_rows.append((tuple(row), -c))
    return feasible_point(len(cols), (), le_rows) is not None


def entails_atom(atoms: Iterable[Atom], goal: Atom) -> bool:
    """Rational entailment of ``goal`` by the conjunction ``atoms``."""
    atoms = list(atoms)
    cols = _columns(atoms, [goal.lhs])
    p = Polyhedron.from_atoms(atoms, cols)
    return all(entails(p, p.row_for(r)) for r in goal.rows())


def entails_all(atoms, goals) -> bool:
    return all(entails_atom(atoms, g) for g in goals)


# ---------------------------------------------------------- projection

def _norm(coeffs: dict, const):
    if not coeffs:
        return (), const
    k = abs(next(iter(sorted(coeffs.items())))[1])
    return tuple(sorted((v, Fraction(c) / k) for v, c in coeffs.items())), Fraction(const) / k


def project(atoms: Iterable[Atom], eliminate: Iterable[str], limit: int = 400) -> list:
    """Fourier-Motzkin projection: constraints over the remaining variables implied by
    ``atoms`` (rationally).  Result atoms are ``<=``/``=`` atoms with integer
    coefficients.  Returns None when the intermediate system exceeds ``limit`` rows."""
    eqs = []
    les = []
    for a in atoms:
        d = {v: Fraction(c) for v, c in a.lhs.coeffs}
        (eqs if a.rel == "=" else les).append((d, Fraction(a.lhs.const)))
    for x in eliminate:
        piv = next((e for e in eqs if e[0].get(x)), None)
        if piv is not None:
            eqs.remove(piv)
            pd, pc = piv
            k = pd[x]

            def sub(d, c):
                f = d.get(x)
                if not f:
                    return d, c
                nd = dict(d)
                for v, a in pd.items():
                    nd[v] = nd.get(v, 0) - f * a / k
                nd = {v: a for v, a in nd.items() if a}
                return nd, c - f * pc / k

            eqs = [sub(d, c) for d, c in eqs]
            les = [sub(d, c) for d, c in les]
            continue
        pos = [(d, c) for d, c in les if d.get(x, 0) > 0]
        neg = [(d, c) for d, c in les if d.get(x, 0) < 0]
        rest = [(d, c) for d, c in les if not d.get(x)]
        for dp, cp in pos:
            for dn, cn in neg:
                a, b = dp[x], -dn[x]
                nd = {}
                for v in set(dp) | set(dn):
                    val = dp.get(v, 0) * b + dn.get(v, 0) * a
                    if val:
                        nd[v] = val
                rest.append((nd, cp * b + cn * a))
        seen = set()
        les = []
        for d, c in rest:
            key = _norm(d, c)
            if key not in seen:
                seen.add(key)
                les.append((d, c))
        if len(les) > limit:
            return None
    out = []
    for d, c in eqs:
        t = _integral(d, c)
        if t.coeffs:
            out.append(Atom.eq(t))
        elif t.const:
            return [Atom.le(LinTerm.constant(1))]
    for d, c in les:
        t = _integral(d, c)
        if t.coeffs:
            out.append(Atom.le(t))
        elif t.const > 0:
            return [Atom.le(LinTerm.constant(1))]
    return out


def _integral(d: dict, c) -> LinTerm:
    from math import lcm
    den = 1
    for v in list(d.values()) + [c]:
        den = lcm(den, Fraction(v).denominator)
    return LinTerm.of({v: int(a * den) for v, a in d.items()}, int(Fraction(c) * den))
