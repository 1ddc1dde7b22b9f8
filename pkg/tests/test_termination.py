import functools

from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import CORPUS, load
from itscost.graph_analysis import sccs
from itscost.its_model import Atom, LinTerm, parse_atoms, run
from itscost.linear_core import satisfiable
from itscost.termination import (analyze, candidate_invariants, prove_component, synthesize_lrf,
                                 unfold, verify_proof)


@functools.lru_cache(maxsize=None)
def unfolded(name):
    return analyze(load(name)).unfolded


def loop_of(ts, loc):
    return [t for t in ts.transitions if t.source == loc and t.target == loc]


def same_up_to_constant(rf, text):
    (want,) = parse_atoms(f"{text} = 0")
    return rf.coeffs == want.lhs.coeffs or rf.coeffs == (-want.lhs).coeffs


def test_countdown_rf():
    ts = load("countdown")
    trs = loop_of(ts, "l1")
    rf, strict = synthesize_lrf(trs, ts.variables)
    assert same_up_to_constant(rf["l1"], "x")
    assert rf["l1"].coeff("x") > 0
    assert strict == {trs[0].id}


def test_aaron3_original_needs_invariant():
    ts = load("aaron3")
    trs = loop_of(ts, "l1")
    assert synthesize_lrf(trs, ts.variables) is None or \
        len(synthesize_lrf(trs, ts.variables)[1]) < len(trs)
    proof, q = prove_component(trs, ts.variables)
    assert [str(a) for a in q["l1"]] == ["z <= 0"]
    assert str(proof.rf["l1"]) == "x - y"
    assert proof.strict == {t.id for t in trs}
    assert proof.children == ()
    ctx = {"l1": q["l1"]}
    assert verify_proof(proof, trs, ts.variables, ctx) == []


def test_candidate_pool_contains_z_nonpositive():
    ts = load("aaron3")
    qs = candidate_invariants(loop_of(ts, "l1"), ts.variables)
    assert any([str(a) for a in q["l1"]] == ["z <= 0"] for q in qs)


def test_aaron3_high_phase_proof():
    """The z >= 1 phase: outer RF z (up to a constant) removing the x-update, with a
    nested proof x - y for the y-increment."""
    ph = analyze(load("aaron3"))
    (p,) = [p for k, p in ph.proofs.items() if k == {"l1"}]
    byid = ph.unfolded.by_id()
    assert same_up_to_constant(p.rf["l1"], "z")
    (strict,) = p.strict
    assert "x" in byid[strict].updated()
    (child,) = p.children
    assert str(child.rf["l1"]) == "x - y"
    assert "y" in byid[next(iter(child.strict))].updated()
    assert verify_proof(p, [byid[i] for i in p.transitions], ph.unfolded.variables) == []


def test_aaron3_unfolding():
    ph = analyze(load("aaron3"))
    un = ph.unfolded
    assert set(un.locations) == {"l0", "l1", "l1_hat", "l2"}
    assert ph.status == "proved" and ph.pre == ()
    bridges = [t for t in un.transitions if t.source == "l1" and t.target == "l1_hat"]
    assert [str(a) for b in bridges for a in b.atoms] == ["z <= 0"]
    # phase partition: plain and hatted copies are mutually exclusive
    for t in loop_of(un, "l1"):
        for h in loop_of(un, "l1_hat"):
            ga = [a for a in t.atoms if "?" not in str(a) and "'" not in str(a)]
            gb = [a for a in h.atoms if "?" not in str(a) and "'" not in str(a)]
            assert not satisfiable(ga + gb)


def test_nonterm_fails():
    ph = analyze(load("nonterm"))
    assert ph.status == "failed"


def test_conditional_precondition():
    ph = analyze(load("conditional"))
    assert ph.status == "conditional"
    assert [str(a) for a in ph.pre] == ["y <= -1"]


def test_all_corpus_proofs_verify():
    for name in CORPUS:
        ph = analyze(load(name))
        byid = ph.unfolded.by_id()
        for key, p in ph.proofs.items():
            trs = [byid[i] for i in p.transitions if i in byid]
            assert verify_proof(p, trs, ph.unfolded.variables, {l: p.inv.get(l, ()) for l in key}) == [], name


def test_unfold_two_conjunct_invariant():
    ts = load("aaron3")
    (comp,) = [c for c in sccs(ts) if not c.trivial]
    q = {"l1": tuple(parse_atoms("z <= 0, x >= 0"))}
    un, hats = unfold(ts, comp, q)
    plain = loop_of(un, "l1")
    # each loop transition is split by the two disjuncts of the negated invariant
    assert len(plain) >= 3


def explained(ts, src, dst, pre, post):
    """Some transition src -> dst of ``ts`` admits the step pre -> post."""
    fix = [Atom.eq(LinTerm.var(v) - LinTerm.constant(pre[v])) for v in ts.variables]
    fix += [Atom.eq(LinTerm.var(v + "'") - LinTerm.constant(post[v])) for v in ts.variables]
    return any(satisfiable(t.relation(ts.variables) + fix)
               for t in ts.transitions if (t.source, t.target) == (src, dst))


@settings(max_examples=40, deadline=None)
@given(st.integers(-6, 6), st.integers(-6, 6), st.integers(-6, 6), st.integers(0, 10**6))
def test_unfolding_preserves_runs(x, y, z, seed):
    """Every step of a run of the unfolded system, apart from phase bridges, is a
    step of the original system, so the original has a run at most as long with the
    same final valuation.  Runs may stop early when the drawn values enable nothing;
    such a run is still a prefix of a real one."""
    ts = load("aaron3")
    un = unfolded("aaron3")
    tr = run(un, {"x": x, "y": y, "z": z}, seed=seed, step_cap=10**5)
    assert tr.terminated
    back = {"l1_hat": "l1"}
    steps = 0
    for (l1, s1), (l2, s2) in zip(tr.visited, tr.visited[1:]):
        if (l1, l2) == ("l1", "l1_hat"):
            assert s1 == s2
            continue
        assert explained(ts, back.get(l1, l1), back.get(l2, l2), s1, s2)
        steps += 1
    assert steps <= tr.steps
