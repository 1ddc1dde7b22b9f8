import pytest

from conftest import CORPUS, report
from crs_golden import EMBEDDED, GOLDEN, missing, parse_one
from itscost.crs_gen import (CRSError, embed_ranking_functions, emit_crs, format_equation,
                             generate_crs, make_conditional, parse_crs, rf_annotation_of)
from itscost.its_model import parse_atoms, parse_its


def crs_of(name, embed=False):
    rep = report(name)
    crs = generate_crs(rep.transformed, rep.loops)
    return embed_ranking_functions(crs, rf_annotation_of(rep.loops)) if embed else crs


def test_golden_equations():
    assert missing(GOLDEN, crs_of("aaron3")) == []


def test_sizean_conjuncts_in_outer_equation():
    crs = crs_of("aaron3")
    (eq,) = [e for e in crs.equations if e.head == "c_f0" and len(e.calls) == 2]
    assert format_equation(eq) == (
        "eq(c_f0(X,Y,Z), 1, [c_l1(X1,Y1,Z1), c_f0(X2,Y2,Z2)], [X1=X2, Y2>=Y1, Z1=Z2, X>=Y, Z>=1, "
        "U1>=1, U2=<X+Z-1, X1=U2, Y1=Y, Z1=Z-1]).")


def test_embedding_golden():
    assert missing(EMBEDDED, crs_of("aaron3", embed=True)) == []


def test_embedding_conservative():
    """Dropping the ranking parameters and their constraints gives back the input."""
    plain = crs_of("aaron3")
    emb = crs_of("aaron3", embed=True)
    assert len(plain.equations) == len(emb.equations)
    for a, b in zip(plain.equations, emb.equations):
        rs = {p for p in b.params if p.startswith("R")} | {x for _, args in b.calls for x in args
                                                          if x.startswith("R")}
        assert b.head == a.head and b.params[:len(a.params)] == a.params
        assert [(f, args[:-1]) for f, args in b.calls] == list(a.calls)
        kept = tuple(x for x in b.atoms if not (x.lhs.variables() & rs))
        assert kept == a.atoms


def test_countdown_equations():
    text = emit_crs(crs_of("countdown"))
    assert "eq(c_l0(X), 1, [c_l1(X)], [])." in text
    assert "eq(c_l1(X), 1, [c_l1(X1)], [X>=1, X1=X-1])." in text


def test_countdown_embedding():
    text = emit_crs(crs_of("countdown", embed=True))
    assert "eq(c_l0(X), 1, [c_l1(X,R1)], [R1=X])." in text
    assert "eq(c_l1(X,R), 1, [c_l1(X1,R1)], [X>=1, X1=X-1, R>=0, R>=R1+1])." in text


def test_isolated_location_dummy():
    ts = parse_its("vars x\nentry a\nlocations a\n")
    crs = generate_crs(ts, [])
    assert emit_crs(crs).splitlines()[1:] == ["eq(c_a(X), 1, [], [])."]


def test_acyclic_crs_embedding_has_no_decrease():
    rep = report("straight")
    crs = embed_ranking_functions(generate_crs(rep.transformed, rep.loops), {})
    assert all(not e.recursive for e in crs.equations)
    assert all(">=0" not in format_equation(e) for e in crs.equations)


def test_missing_rf_is_an_error():
    crs = crs_of("countdown")
    with pytest.raises(CRSError):
        embed_ranking_functions(crs, {})


def test_conditional_wrapper():
    crs = make_conditional(crs_of("conditional"), parse_atoms("y <= -1"))
    assert crs.conditional and crs.entry.startswith("ce_")
    head = crs.equations[0]
    assert format_equation(head) == "eq(ce_l0(X,Y), 1, [c_l0(X,Y)], [Y=<-1])."


def test_conditional_true_precondition():
    crs = make_conditional(crs_of("countdown"), ())
    assert format_equation(crs.equations[0]) == "eq(ce_l0(X), 1, [c_l0(X)], [])."


@pytest.mark.parametrize("name", [n for n in CORPUS if n != "nonterm"])
@pytest.mark.parametrize("embed", [False, True])
def test_roundtrip(name, embed):
    crs = crs_of(name, embed)
    back = parse_crs(emit_crs(crs))
    assert back.entry == crs.entry
    assert [format_equation(e) for e in back.equations] == [format_equation(e) for e in crs.equations]
    assert emit_crs(back) == emit_crs(crs)


def test_equation_count_aaron3():
    """One equation per outgoing transition of unitary SCCs (or a dummy), one per
    cycle plus one per exit of the entry for the outer loop, and the inner loop's
    own recursive and call-free equations."""
    crs = crs_of("aaron3")
    ts = report("aaron3").transformed
    by = {}
    for e in crs.equations:
        by[e.head] = by.get(e.head, 0) + 1
    outdeg = {l: sum(1 for t in ts.transitions if t.source == l) for l in ts.locations}
    for loc in ("l0", "l1_hat", "l1_1"):
        assert by["c_" + loc] == outdeg[loc]
    assert by["c_l2"] == 1
    assert by["c_f0"] == 1 + 3
    assert by["c_l1"] == 1 + 4


def test_parse_errors():
    with pytest.raises(CRSError):
        parse_crs("eq(c_a(X), 1, [c_b(X)]).")
    with pytest.raises(CRSError):
        parse_crs("entry(c_a).\neq(c_a(X), one, [], []).")


def test_emitted_golden_lines():
    assert format_equation(parse_one(GOLDEN[3])) == "eq(c_l2(X,Y,Z), 1, [], [])."
