"""Symbolic path enumeration for the cost-dominance check between a system and its
loop-nested transform.

A path is a sequence of transitions from the entry.  Its relation is the
conjunction of the step relations with the variables of step i renamed to
``v@i``; initial values are ``v@0`` on both sides so relations can be compared.
"""
from itscost.its_model import Atom, LinTerm, is_undef, prime
from itscost.linear_core import project, satisfiable


def step(t, variables, i, tag=""):
    ren = {}
    for v in variables:
        ren[v] = f"{tag}{v}@{i}"
        ren[prime(v)] = f"{tag}{v}@{i + 1}"
    for a in t.atoms:
        for w in a.variables():
            if is_undef(w):
                ren[w] = f"{tag}{w}@{i}"
    return [a.rename(ren) for a in t.relation(variables)]


def _shrink(atoms, keep):
    """Project ``atoms`` onto the variables in ``keep``; the input when projection
    would blow up."""
    elim = sorted({w for a in atoms for w in a.variables()} - keep)
    proj = project(atoms, elim) if elim else atoms
    return atoms if proj is None else proj


def enumerate_paths(ts, depth):
    """All rationally feasible paths of ``ts`` from its entry with 1..depth steps,
    as (transitions, end location, atoms relating ``v@0`` to ``v@k``)."""
    out = []
    variables = ts.variables

    def go(loc, trs, atoms):
        if trs:
            out.append((tuple(trs), loc, atoms))
        if len(trs) == depth:
            return
        live = {f"{v}@{i}" for v in variables for i in (0, len(trs) + 1)}
        for t in ts.outgoing(loc):
            nxt = _shrink(atoms + step(t, variables, len(trs)), live)
            if satisfiable(nxt):
                go(t.target, trs + [t], nxt)

    go(ts.entry, [], [])
    return out


def origin_map(original, transformed):
    """Location of ``original`` each transformed location stands for; None for the
    fresh outer-loop heads, which sit between the two halves of an outer transition."""
    prov = transformed.provenance
    out = {}
    for l in transformed.locations:
        x = l
        while x not in original.locations and prov.get(x, "").startswith("clone-of "):
            x = prov[x][len("clone-of "):]
        out[l] = x if x in original.locations else None
    return out


def path_origin(locs, omap):
    for l in reversed(locs):
        if omap[l] is not None:
            return omap[l]
    return None


def _covered(region, pieces):
    """Every point of the conjunction ``region`` lies in some conjunction of ``pieces``
    (rationally, after integer negation of the piece atoms)."""
    if not satisfiable(region):
        return True
    for i, c in enumerate(pieces):
        if not satisfiable(region + c):
            continue
        rest = pieces[:i] + pieces[i + 1:]
        prefix = []
        for a in c:
            for na in a.negate():
                if not _covered(region + prefix + [na], rest):
                    return False
            prefix.append(a)
        return True
    return False


def counterpart_check(original, transformed, path, max_len, omap=None):
    """Look for transformed paths of at least the same length, ending where ``path``
    ends, whose relations between initial and final program values together cover
    that of ``path``.  Returns True when they do.

    The search simulates ``path``: a transformed step either advances to the next
    original step, its program values then pinned to the original's, or leaves
    the program values unchanged (a stutter).  Pinning only prunes the search;
    the covering pieces are the transformed paths' own relations."""
    trs, end, _ = path
    k = len(trs)
    pv = list(original.variables)
    omap = omap or origin_map(original, transformed)
    u_atoms = []
    for j, t in enumerate(trs):
        u_atoms += step(t, original.variables, j, "u:")
    pin0 = [Atom.eq(LinTerm.var(f"u:{v}@0") - LinTerm.var(f"{v}@0")) for v in pv]
    fin = [Atom.eq(LinTerm.var(f"u:{v}@{k}") - LinTerm.var(f"fin:{v}")) for v in pv]
    u_atoms += pin0 + fin
    region = _shrink(u_atoms, {f"{v}@0" for v in pv} | {f"fin:{v}" for v in pv})
    tvars = transformed.variables
    keep = {f"{v}@0" for v in pv} | {f"fin:{v}" for v in pv}
    pieces = []

    def pinned(n, i):
        return [Atom.eq(LinTerm.var(f"t:{v}@{n}") - LinTerm.var(f"u:{v}@{i}")) for v in pv]

    def go(loc, locs, atoms, n, i):
        if i == k and path_origin(locs, omap) == end:
            link = [Atom.eq(LinTerm.var(f"t:{v}@{n}") - LinTerm.var(f"fin:{v}")) for v in pv]
            rel = atoms + link
            proj = project(rel, sorted({w for a in rel for w in a.variables()} - keep))
            if proj is not None and satisfiable(region + proj):
                pieces.append(proj)
                if _covered(region, pieces):
                    return True
        if n == max_len:
            return False
        live = {f"{v}@0" for v in pv} | {f"t:{v}@{n + 1}" for v in tvars}
        for t in transformed.outgoing(loc):
            nxt = _shrink(atoms + step(t, tvars, n, "t:"), live)
            moves = []
            if i < k:
                moves.append(i + 1)
            if not (t.updated() & set(pv)):
                moves.append(i)
            for i2 in moves:
                if satisfiable(u_atoms + nxt + pinned(n + 1, i2)):
                    if go(t.target, locs + [t.target], nxt, n + 1, i2):
                        return True
        return False

    # initial flag values are unconstrained
    start = [Atom.eq(LinTerm.var(f"t:{v}@0") - LinTerm.var(f"{v}@0")) for v in pv]
    return go(transformed.entry, [transformed.entry], start, 0, 0)
