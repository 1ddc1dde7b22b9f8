"""Integer transition systems: terms, atoms, transitions, the text format
and a seeded concrete interpreter."""
from __future__ import annotations

import random
import re
from dataclasses import dataclass, field
from math import gcd
from typing import Iterable, Mapping

PRIME = "'"


def is_primed(name: str) -> bool:
    return name.endswith(PRIME)


def is_undef(name: str) -> bool:
    return name.startswith("?")


def prime(name: str) -> str:
    return name + PRIME


def unprime(name: str) -> str:
    return name[:-1] if name.endswith(PRIME) else name


class ITSSyntaxError(ValueError):
    def __init__(self, msg, line=0, col=0):
        super().__init__(f"line {line}, column {col}: {msg}")
        self.line = line
        self.col = col


@dataclass(frozen=True)
class LinTerm:
    """Integer linear combination ``sum(c * v) + const``; zero coefficients are dropped."""

    coeffs: tuple = ()
    const: int = 0

    @staticmethod
    def of(coeffs: Mapping[str, int] | None = None, const: int = 0) -> "LinTerm":
        items = tuple(sorted((v, int(c)) for v, c in (coeffs or {}).items() if c))
        return LinTerm(items, int(const))

    @staticmethod
    def var(name: str, coeff: int = 1) -> "LinTerm":
        return LinTerm.of({name: coeff})

    @staticmethod
    def constant(c: int) -> "LinTerm":
        return LinTerm((), int(c))

    def as_dict(self) -> dict:
        return dict(self.coeffs)

    def coeff(self, name: str) -> int:
        for v, c in self.coeffs:
            if v == name:
                return c
        return 0

    def variables(self) -> set:
        return {v for v, _ in self.coeffs}

    def __add__(self, other: "LinTerm") -> "LinTerm":
        d = self.as_dict()
        for v, c in other.coeffs:
            d[v] = d.get(v, 0) + c
        return LinTerm.of(d, self.const + other.const)

    def __neg__(self) -> "LinTerm":
        return LinTerm(tuple((v, -c) for v, c in self.coeffs), -self.const)

    def __sub__(self, other: "LinTerm") -> "LinTerm":
        return self + (-other)

    def scale(self, k: int) -> "LinTerm":
        return LinTerm.of({v: c * k for v, c in self.coeffs}, self.const * k)

    def rename(self, mapping: Mapping[str, str]) -> "LinTerm":
        d: dict = {}
        for v, c in self.coeffs:
            w = mapping.get(v, v)
            d[w] = d.get(w, 0) + c
        return LinTerm.of(d, self.const)

    def substitute(self, mapping: Mapping[str, "LinTerm"]) -> "LinTerm":
        out = LinTerm.constant(self.const)
        for v, c in self.coeffs:
            out = out + (mapping[v].scale(c) if v in mapping else LinTerm.var(v, c))
        return out

    def evaluate(self, env: Mapping[str, int]) -> int:
        return sum(c * env[v] for v, c in self.coeffs) + self.const

    def primed(self) -> "LinTerm":
        return self.rename({v: prime(v) for v in self.variables() if not is_undef(v)})

    def __str__(self) -> str:
        return format_term(self)


def format_term(t: LinTerm, names: Mapping[str, str] | None = None) -> str:
    names = names or {}
    parts = []
    for v, c in t.coeffs:
        v = names.get(v, v)
        mag = abs(c)
        body = v if mag == 1 else f"{mag}*{v}"
        parts.append(("-" if c < 0 else "+", body))
    if t.const or not parts:
        parts.append(("-" if t.const < 0 else "+", str(abs(t.const))))
    s = ("-" if parts[0][0] == "-" else "") + parts[0][1]
    for sign, body in parts[1:]:
        s += f" {sign} {body}"
    return s


@dataclass(frozen=True)
class Atom:
    """``lhs <= 0`` or ``lhs = 0`` in normalized integer form."""

    lhs: LinTerm
    rel: str = "<="

    @staticmethod
    def le(lhs: LinTerm) -> "Atom":
        g = 0
        for _, c in lhs.coeffs:
            g = gcd(g, c)
        if g > 1:
            # integer tightening: sum(c/g v) <= floor(-k/g)
            lhs = LinTerm(tuple((v, c // g) for v, c in lhs.coeffs), -((-lhs.const) // g))
        return Atom(lhs, "<=")

    @staticmethod
    def eq(lhs: LinTerm) -> "Atom":
        g = lhs.const
        for _, c in lhs.coeffs:
            g = gcd(g, c)
        if g > 1:
            lhs = LinTerm(tuple((v, c // g) for v, c in lhs.coeffs), lhs.const // g)
        if lhs.coeffs and lhs.coeffs[0][1] < 0:
            lhs = -lhs
        return Atom(lhs, "=")

    @staticmethod
    def compare(a: LinTerm, op: str, b: LinTerm) -> "Atom":
        if op in ("<=", "=<"):
            return Atom.le(a - b)
        if op == "<":
            return Atom.le(a - b + LinTerm.constant(1))
        if op == ">=":
            return Atom.le(b - a)
        if op == ">":
            return Atom.le(b - a + LinTerm.constant(1))
        if op in ("=", "=="):
            return Atom.eq(a - b)
        raise ValueError(f"unknown relation {op!r}")

    def variables(self) -> set:
        return self.lhs.variables()

    def has_primed(self) -> bool:
        return any(is_primed(v) for v in self.variables())

    def rename(self, mapping) -> "Atom":
        t = self.lhs.rename(mapping)
        return Atom.le(t) if self.rel == "<=" else Atom.eq(t)

    def substitute(self, mapping) -> "Atom":
        t = self.lhs.substitute(mapping)
        return Atom.le(t) if self.rel == "<=" else Atom.eq(t)

    def holds(self, env) -> bool:
        v = self.lhs.evaluate(env)
        return v <= 0 if self.rel == "<=" else v == 0

    def negate(self) -> list:
        """Disjuncts of the integer negation."""
        one = LinTerm.constant(1)
        if self.rel == "<=":
            return [Atom.le(-self.lhs + one)]
        return [Atom.le(self.lhs + one), Atom.le(-self.lhs + one)]

    def rows(self) -> list:
        """The atom as ``<=`` terms (equalities give two)."""
        if self.rel == "<=":
            return [self.lhs]
        return [self.lhs, -self.lhs]

    def is_trivial(self) -> bool:
        return not self.lhs.coeffs and self.holds({})

    def __str__(self) -> str:
        return format_atom(self)


def format_atom(a: Atom, names: Mapping[str, str] | None = None, le: str = "<=", prefer=None) -> str:
    """Render with variables on both sides, e.g. ``x >= y`` or ``u2 <= x + z - 1``.
    ``prefer`` ranks variables for the left side of an equality."""
    t = a.lhs
    if not t.coeffs:
        return f"{t.const} {'=' if a.rel == '=' else le} 0"
    neg = [(v, c) for v, c in t.coeffs if c < 0]
    pos = [(v, c) for v, c in t.coeffs if c > 0]
    if a.rel == "=":
        primed = [(v, c) for v, c in t.coeffs if is_primed(v)]
        if prefer is not None:
            v, c = min(t.coeffs, key=lambda vc: (prefer(vc[0]), abs(vc[1]) != 1))
        else:
            v, c = primed[0] if primed else t.coeffs[0]
        if c < 0:
            t = -t
            c = -c
        left = LinTerm.var(v, c)
        right = -(t - left)
        return f"{format_term(left, names)} = {format_term(right, names)}"
    if len(neg) == 1:
        v, c = neg[0]
        left = LinTerm.var(v, -c)
        right = t + left  # sum pos + const
        return f"{format_term(left, names)} >= {format_term(right, names)}"
    if len(pos) >= 1:
        v, c = pos[0]
        left = LinTerm.var(v, c)
        right = -(t - left)
        return f"{format_term(left, names)} {le} {format_term(right, names)}"
    left = -t + LinTerm.constant(t.const)
    return f"{format_term(left, names)} >= {t.const}"


def conj_str(atoms: Iterable[Atom]) -> str:
    atoms = list(atoms)
    return ", ".join(str(a) for a in atoms) if atoms else "true"


@dataclass(frozen=True)
class Transition:
    id: int
    source: str
    target: str
    atoms: tuple = ()

    def updated(self) -> set:
        """Program variables with an explicit primed constraint."""
        return {unprime(v) for a in self.atoms for v in a.variables() if is_primed(v)}

    def undefs(self) -> list:
        seen = []
        for a in self.atoms:
            for v, _ in a.lhs.coeffs:
                if is_undef(v) and v not in seen:
                    seen.append(v)
        return seen

    def guard(self) -> tuple:
        return tuple(a for a in self.atoms if not a.has_primed())

    def relation(self, variables: Iterable[str]) -> list:
        """Atoms with the implicit frame equalities made explicit."""
        upd = self.updated()
        frame = [Atom.eq(LinTerm.var(prime(v)) - LinTerm.var(v)) for v in variables if v not in upd]
        return list(self.atoms) + frame

    def with_atoms(self, atoms, *, id=None, source=None, target=None) -> "Transition":
        return Transition(self.id if id is None else id, source or self.source,
                          target or self.target, tuple(atoms))

    def __str__(self) -> str:
        return f"{self.source} -> {self.target} [ {conj_str(self.atoms)} ]"


@dataclass(frozen=True)
class TransitionSystem:
    variables: tuple
    entry: str
    transitions: tuple
    locations: tuple = ()
    flags: frozenset = frozenset()
    provenance: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        locs = list(self.locations)
        for x in [self.entry] + [l for t in self.transitions for l in (t.source, t.target)]:
            if x not in locs:
                locs.append(x)
        object.__setattr__(self, "locations", tuple(locs))

    def transition(self, tid: int) -> Transition:
        for t in self.transitions:
            if t.id == tid:
                return t
        raise KeyError(tid)

    def by_id(self) -> dict:
        return {t.id: t for t in self.transitions}

    def outgoing(self, loc: str) -> list:
        return [t for t in self.transitions if t.source == loc]

    def program_vars(self) -> tuple:
        return tuple(v for v in self.variables if v not in self.flags)

    def next_id(self) -> int:
        return max((t.id for t in self.transitions), default=-1) + 1

    def replace(self, **kw) -> "TransitionSystem":
        d = dict(variables=self.variables, entry=self.entry, transitions=self.transitions,
                 locations=self.locations, flags=self.flags, provenance=dict(self.provenance))
        d.update(kw)
        return TransitionSystem(**d)

    def canonical(self) -> "TransitionSystem":
        """Renumber transitions in order and rename undefined variables per transition."""
        ts = []
        for i, t in enumerate(sorted(self.transitions, key=lambda t: t.id)):
            ren = {u: f"?u{i}_{k + 1}" for k, u in enumerate(t.undefs())}
            ts.append(Transition(i, t.source, t.target, tuple(a.rename(ren) for a in t.atoms)))
        return self.replace(transitions=tuple(ts))


# ---------------------------------------------------------------- parsing

_TOKEN = re.compile(r"\s*(?:(?P<num>\d+)|(?P<id>\??[A-Za-z_][A-Za-z0-9_]*'?)|"
                    r"(?P<op><=|>=|=<|==|->|<|>|=|\+|-|\*|\(|\)|\[|\]|,))")


def _tokens(text: str, line: int):
    pos = 0
    out = []
    text = text.rstrip()
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if not m or m.end() == pos:
            raise ITSSyntaxError(f"unexpected character {text[pos:].strip()[:1]!r}", line, pos + 1)
        kind = m.lastgroup
        out.append((kind, m.group(kind), m.start(kind) + 1))
        pos = m.end()
    return out


class _TermParser:
    def __init__(self, toks, line):
        self.toks = toks
        self.i = 0
        self.line = line

    def peek(self):
        return self.toks[self.i] if self.i < len(self.toks) else (None, None, 0)

    def take(self, value=None):
        tok = self.peek()
        if tok[0] is None or (value is not None and tok[1] != value):
            col = tok[2] or (self.toks[-1][2] if self.toks else 0)
            raise ITSSyntaxError(f"expected {value or 'token'}, got {tok[1]!r}", self.line, col)
        self.i += 1
        return tok

    def term(self) -> LinTerm:
        sign = 1
        if self.peek()[1] in ("+", "-"):
            sign = -1 if self.take()[1] == "-" else 1
        t = self.product().scale(sign)
        while self.peek()[1] in ("+", "-"):
            s = -1 if self.take()[1] == "-" else 1
            t = t + self.product().scale(s)
        return t

    def product(self) -> LinTerm:
        t = self.factor()
        while self.peek()[1] == "*":
            self.take()
            u = self.factor()
            if t.coeffs and u.coeffs:
                raise ITSSyntaxError("nonlinear product", self.line, self.peek()[2])
            t = u.scale(t.const) if not t.coeffs else t.scale(u.const)
        return t

    def factor(self) -> LinTerm:
        kind, val, col = self.peek()
        if kind == "num":
            self.take()
            return LinTerm.constant(int(val))
        if kind == "id":
            self.take()
            return LinTerm.var(val)
        if val == "(":
            self.take()
            t = self.term()
            self.take(")")
            return t
        if val == "-":
            self.take()
            return -self.factor()
        raise ITSSyntaxError(f"unexpected {val!r}", self.line, col)

    def atom(self) -> Atom | None:
        kind, val, _ = self.peek()
        if kind == "id" and val == "true":
            self.take()
            return None
        lhs = self.term()
        kind, op, col = self.peek()
        if op not in ("<=", ">=", "=<", "==", "<", ">", "="):
            raise ITSSyntaxError(f"expected relation, got {op!r}", self.line, col)
        self.take()
        return Atom.compare(lhs, op, self.term())


def parse_atoms(text: str, line: int = 0) -> list:
    """Parse a comma-separated conjunction (``true`` is empty)."""
    p = _TermParser(_tokens(text, line), line)
    atoms = []
    while p.peek()[0] is not None:
        a = p.atom()
        if a is not None:
            atoms.append(a)
        if p.peek()[0] is not None:
            p.take(",")
    return atoms


def parse_its(text: str) -> TransitionSystem:
    variables: list = []
    flags: list = []
    declared: list | None = None
    entry = None
    transitions = []
    provenance = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line, _, comment = raw.partition("#")
        c = comment.strip()
        if c.startswith("loc "):
            name, _, info = c[4:].partition(":")
            provenance[name.strip()] = info.strip()
        if not line.strip():
            continue
        head, *rest = line.split()
        if head in ("vars", "flags", "locations"):
            target = {"vars": variables, "flags": flags}.get(head)
            if head == "locations":
                declared = declared or []
                target = declared
            for name in rest:
                if name in target:
                    what = "location" if head == "locations" else "variable"
                    raise ITSSyntaxError(f"duplicate {what} {name!r}", lineno, line.index(name) + 1)
                target.append(name)
            continue
        if head == "entry":
            if len(rest) != 1:
                raise ITSSyntaxError("entry takes one location", lineno, 1)
            entry = rest[0]
            continue
        m = re.match(r"\s*(\S+)\s*->\s*(\S+)\s*\[(.*)\]\s*$", line)
        if not m:
            raise ITSSyntaxError("expected 'src -> dst [ atoms ]'", lineno, 1)
        src, dst, body = m.groups()
        atoms = parse_atoms(body, lineno)
        tid = len(transitions)
        undefs = []
        for a in atoms:
            for v in sorted(a.variables()):
                if is_undef(v) and v not in undefs:
                    undefs.append(v)
        ren = {u: f"?u{tid}_{k + 1}" for k, u in enumerate(undefs)}
        transitions.append(Transition(tid, src, dst, tuple(a.rename(ren) for a in atoms)))
    if entry is None:
        raise ITSSyntaxError("missing entry declaration", 0, 0)
    allvars = variables + [f for f in flags if f not in variables]
    known = set(allvars)
    for t in transitions:
        for a in t.atoms:
            for v in a.variables():
                if not is_undef(v) and unprime(v) not in known:
                    raise ITSSyntaxError(f"undeclared variable {v!r} in transition {t.id}", 0, 0)
    if declared is not None:
        for t in transitions:
            for loc in (t.source, t.target):
                if loc not in declared:
                    raise ITSSyntaxError(f"undeclared location {loc!r}", 0, 0)
        if entry not in declared:
            raise ITSSyntaxError(f"undeclared location {entry!r}", 0, 0)
    return TransitionSystem(tuple(allvars), entry, tuple(transitions),
                            tuple(declared or ()), frozenset(flags), provenance)


def emit_its(ts: TransitionSystem) -> str:
    lines = ["vars " + " ".join(ts.program_vars())]
    if ts.flags:
        lines.append("flags " + " ".join(v for v in ts.variables if v in ts.flags))
    lines.append("locations " + " ".join(ts.locations))
    lines.append(f"entry {ts.entry}")
    for loc in ts.locations:
        if loc in ts.provenance:
            lines.append(f"# loc {loc}: {ts.provenance[loc]}")
    for t in sorted(ts.transitions, key=lambda t: t.id):
        lines.append(str(t))
    return "\n".join(lines) + "\n"


# ------------------------------------------------------------ interpreter

@dataclass
class Trace:
    steps: int
    visited: list
    terminated: bool
    choices: list


class _Compiled:
    __slots__ = ("t", "undefs", "checks", "solvers", "free")

    def __init__(self, t: Transition, variables):
        self.t = t
        self.undefs = t.undefs()
        upd = t.updated()
        self.checks = [(a.lhs.coeffs, a.lhs.const, a.rel == "=") for a in t.atoms]
        self.free = [prime(v) for v in variables if v in upd]


def _draw_primed(c: _Compiled, env: dict, rng: random.Random, rng_range: int) -> bool:
    unknown = [p for p in c.free]
    progress = True
    while unknown and progress:
        progress = False
        for coeffs, const, is_eq in c.checks:
            if not is_eq:
                continue
            missing = [(v, k) for v, k in coeffs if v not in env]
            if len(missing) != 1:
                continue
            v, k = missing[0]
            rest = sum(cc * env[w] for w, cc in coeffs if w != v) + const
            if rest % k:
                return False
            env[v] = -rest // k
            unknown.remove(v)
            progress = True
    for v in unknown:
        lo, hi = None, None
        for coeffs, const, is_eq in c.checks:
            vs = [w for w, _ in coeffs if w not in env]
            if vs != [v]:
                continue
            k = dict(coeffs)[v]
            rest = sum(cc * env[w] for w, cc in coeffs if w != v) + const
            # k*v + rest <= 0 (or == 0)
            if k > 0:
                b = (-rest) // k
                hi = b if hi is None else min(hi, b)
                if is_eq:
                    lo = b if lo is None else max(lo, b)
            else:
                b = _ceil_div(rest, -k)
                lo = b if lo is None else max(lo, b)
                if is_eq:
                    hi = b if hi is None else min(hi, b)
        old = env[unprime(v)]
        if lo is None and hi is None:
            lo, hi = old - rng_range, old + rng_range
        elif lo is None:
            lo = hi - rng_range
        elif hi is None:
            hi = lo + rng_range
        if lo > hi:
            return False
        env[v] = rng.randint(lo, hi)
    return True


def _ceil_div(a: int, b: int) -> int:
    return -((-a) // b)


def run(ts: TransitionSystem, init: Mapping[str, int], seed: int = 0, range: int = 8,
        step_cap: int = 10**6, record: bool = True) -> Trace:
    """Execute ``ts`` from its entry, resolving nondeterminism with a seeded generator.

    Undefined variables are drawn from ``[-range, range]``; primed variables not fixed
    by an equality are drawn from the interval the transition allows.  With
    ``record=False`` only the final state is kept in ``visited``.
    """
    if range < 1 or step_cap < 0:
        raise ValueError("range must be >= 1 and step_cap >= 0")
    rng = random.Random(seed)
    variables = ts.variables
    state = {v: int(init.get(v, 0)) for v in variables}
    out: dict = {}
    for t in ts.transitions:
        out.setdefault(t.source, []).append(_Compiled(t, variables))
    loc = ts.entry
    visited = [(loc, dict(state))]
    choices = []
    steps = 0
    while steps < step_cap:
        enabled = []
        for c in out.get(loc, ()):
            env = dict(state)
            for u in c.undefs:
                env[u] = rng.randint(-range, range)
            if not _draw_primed(c, env, rng, range):
                continue
            ok = True
            for coeffs, const, is_eq in c.checks:
                s = const
                for v, k in coeffs:
                    s += k * env[v]
                if (s != 0) if is_eq else (s > 0):
                    ok = False
                    break
            if ok:
                enabled.append((c, env))
        if not enabled:
            return Trace(steps, visited if record else [(loc, state)], True, choices)
        c, env = enabled[rng.randrange(len(enabled))] if len(enabled) > 1 else enabled[0]
        upd = c.t.updated()
        state = {v: (env[prime(v)] if v in upd else state[v]) for v in variables}
        loc = c.t.target
        steps += 1
        if record:
            visited.append((loc, dict(state)))
            choices.append(c.t.id)
    return Trace(steps, visited if record else [(loc, state)], False, choices)
