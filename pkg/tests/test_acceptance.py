"""The ten acceptance criteria, one test each.  Every test prints a single
PASS/FAIL line (also visible without ``-s``)."""
import io
import itertools
import random
import time
from collections import Counter

import pytest

from conftest import CORPUS, fixture_path, load
from crs_golden import EMBEDDED, GOLDEN, missing
from itscost import analyze_ts
from itscost.cli import main
from itscost.crs_gen import embed_ranking_functions, generate_crs, rf_annotation_of
from itscost.graph_analysis import sccs
from itscost.linear_core import check_certificate, check_witness, lp_feasible
from itscost.pipeline import check_soundness, inner_size_relations
from itscost.termination import analyze, prove_component, verify_proof
from itscost.transform import transform_system, validate
from lp_oracle import fm_feasible
from paths import counterpart_check, enumerate_paths, origin_map
from test_linear_core import random_polyhedron


@pytest.fixture
def verdict(capsys):
    def emit(n, ok, detail):
        with capsys.disabled():
            print(f"\n{'PASS' if ok else 'FAIL'} criterion {n}: {detail}")
        assert ok, detail
    return emit


def test_criterion_01_aaron3_cubic(verdict):
    out = io.StringIO()
    t = time.perf_counter()
    code = main(["analyze", fixture_path("aaron3")], out=out)
    dt = time.perf_counter() - t
    deg = [l for l in out.getvalue().splitlines() if l.startswith("degree:")]
    ok = code == 0 and deg == ["degree: 3"] and dt < 10
    verdict(1, ok, f"analyze aaron3 -> {deg[0] if deg else '?'}, exit {code}, {dt:.2f} s")


def _same_up_to_constant(rf, coeffs):
    have = dict(rf.coeffs)
    return have == coeffs or have == {v: -k for v, k in coeffs.items()}


def test_criterion_02_proof_reproduction(verdict):
    ts = load("aaron3")
    loop = [t for t in ts.transitions if t.source == t.target == "l1"]
    proof, q = prove_component(loop, ts.variables)
    cond_ok = ([str(a) for a in q["l1"]] == ["z <= 0"] and str(proof.rf["l1"]) == "x - y"
               and proof.strict == {t.id for t in loop}
               and verify_proof(proof, loop, ts.variables, {"l1": q["l1"]}) == [])
    ph = analyze(ts)
    byid = ph.unfolded.by_id()
    (p,) = [p for k, p in ph.proofs.items() if k == {"l1"}]
    trs = [byid[i] for i in p.transitions]
    (x_upd,) = [t.id for t in trs if "x" in t.updated()]
    (y_upd,) = [t.id for t in trs if "y" in t.updated()]
    (child,) = p.children if len(p.children) == 1 else (None,)
    nested_ok = (_same_up_to_constant(p.rf["l1"], {"z": 1}) and p.strict == {x_upd}
                 and child is not None and str(child.rf["l1"]) == "x - y"
                 and child.strict == {y_upd} and child.children == ()
                 and verify_proof(p, trs, ph.unfolded.variables) == [])
    verdict(2, cond_ok and nested_ok,
            f"conditional <x - y | z <= 0>: {cond_ok}; nested <z, {{x-update}}, [<x - y>]>: {nested_ok}")


# expected shape of the transformed aaron3: edge counts between location roles
EXPECTED_EDGES = Counter({("l0", "f0"): 1, ("l0", "l1'"): 1, ("l0", "l1^"): 1,
                          ("l1'", "l1'"): 1, ("l1'", "f0"): 4,
                          ("f0", "l1''"): 1, ("l1''", "f0"): 4, ("l1''", "l1''"): 1,
                          ("f0", "l2"): 2, ("f0", "l1^"): 1,
                          ("l1^", "l1^"): 2, ("l1^", "l2"): 2})
EXPECTED_SCCS = {frozenset({"l0"}), frozenset({"l2"}), frozenset({"l1'"}), frozenset({"l1^"}),
                 frozenset({"f0", "l1''"})}


def isomorphic(ts, edges, entry="l0"):
    roles = sorted({r for e in edges for r in e})
    locs = list(ts.locations)
    if len(locs) != len(roles):
        return None
    have = Counter((t.source, t.target) for t in ts.transitions)
    for perm in itertools.permutations(roles):
        m = dict(zip(locs, perm))
        if m[ts.entry] != entry:
            continue
        if Counter({(m[a], m[b]): k for (a, b), k in have.items()}) == edges:
            return m
    return None


def test_criterion_03_five_sccs(verdict):
    tr = transform_system(analyze(load("aaron3")).unfolded)
    comps = sccs(tr.ts)
    m = isomorphic(tr.ts, EXPECTED_EDGES)
    ok = (len(comps) == 5 and m is not None
          and {frozenset(m[l] for l in c.locations) for c in comps} == EXPECTED_SCCS)
    verdict(3, ok, f"{len(comps)} SCCs {sorted(sorted(c.locations) for c in comps)}, "
                   f"isomorphic to the expected shape: {m is not None}")


def _aaron3_crs():
    tr = transform_system(analyze(load("aaron3")).unfolded)
    return generate_crs(tr.ts, tr.loops), tr.loops


def test_criterion_04_crs_golden(verdict):
    crs, _ = _aaron3_crs()
    miss = missing(GOLDEN, crs)
    verdict(4, miss == [], f"{len(GOLDEN) - len(miss)}/{len(GOLDEN)} golden equations present")


def test_criterion_05_embedding_golden(verdict):
    crs, loops = _aaron3_crs()
    miss = missing(EMBEDDED, embed_ranking_functions(crs, rf_annotation_of(loops)))
    verdict(5, miss == [], f"{len(EMBEDDED) - len(miss)}/{len(EMBEDDED)} golden embedded equations present")


SOUNDNESS_REQUIRED = {"aaron3", "countdown", "two_phase", "nested", "nonterm"}


def test_criterion_06_soundness_fuzz(verdict):
    t = time.perf_counter()
    viol, term, caps = 0, 0, 0
    for i, name in enumerate(CORPUS):
        ts = load(name)
        rep = analyze_ts(ts)
        s = check_soundness(ts, rep, 1000, seed=1000 + i, range_=8, init_range=20, step_cap=10**6)
        viol += len(s["violations"])
        term += s["terminated"]
        caps += s["cap_hits"]
    dt = time.perf_counter() - t
    ok = viol == 0 and dt < 60 and len(CORPUS) >= 10 and SOUNDNESS_REQUIRED <= set(CORPUS)
    verdict(6, ok, f"{len(CORPUS)} fixtures x 1000 runs: {term} terminated, {caps} cap hits, "
                   f"{viol} violations, {dt:.1f} s")


def test_criterion_07_validator(verdict):
    bad = []
    n = 0
    for name in CORPUS:
        ph = analyze(load(name))
        if ph.status == "failed":
            continue
        tr = transform_system(ph.unfolded)
        ok, diags, loops = validate(tr.ts)
        n += sum(1 for c in sccs(tr.ts) if not c.trivial)
        if not ok:
            bad.append((name, diags))
    verdict(7, bad == [], f"{n} non-trivial SCCs validated, failures: {bad}")


def test_criterion_08_path_dominance(verdict):
    t = time.perf_counter()
    bad, total, names = [], 0, []
    for name in CORPUS:
        ts = load(name)
        if len(ts.locations) > 4:
            continue
        ph = analyze(ts)
        if ph.status == "failed":
            continue
        names.append(name)
        un = ph.unfolded
        tr = transform_system(un).ts
        om = origin_map(un, tr)
        for p in enumerate_paths(un, 6):
            total += 1
            if not counterpart_check(un, tr, p, 2 * len(p[0]) + 3, om):
                bad.append((name, [x.id for x in p[0]]))
    dt = time.perf_counter() - t
    verdict(8, bad == [] and dt < 120,
            f"{total} paths of depth <= 6 over {names}: {len(bad)} without counterpart, {dt:.1f} s")


def test_criterion_09_lp_engine(verdict):
    rng = random.Random(2024)
    agree = certs = 0
    for _ in range(500):
        p = random_polyhedron(rng)
        out = lp_feasible(p)
        agree += out.feasible == fm_feasible(p.rows, len(p.columns))
        certs += check_witness(p, out.witness) if out.feasible else check_certificate(p, out.certificate)
    verdict(9, agree == 500 and certs == 500, f"500 polyhedra: {agree} agree with the oracle, "
                                               f"{certs} certificates validate")


def test_criterion_10_size_relations(verdict):
    rels = inner_size_relations(analyze_ts(load("aaron3")))
    got = [sorted(str(a) for a in r.atoms) for r in rels.values()]
    verdict(10, got == [["x' = x", "y' >= y", "z' = z"]], f"inner loop relations {got}")
