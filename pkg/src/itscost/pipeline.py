"""End-to-end analysis: termination phases, transformation, CRS and bound."""
from __future__ import annotations

import random
from dataclasses import dataclass, field

from .bound_solver import Bound, asymptotic_degree, eval_bound, solve
from .crs_gen import CRS, embed_ranking_functions, generate_crs, make_conditional, rf_annotation_of
from .graph_analysis import sccs
from .its_model import TransitionSystem, conj_str, run
from .size_rel import size_relations
from .termination import analyze
from .transform import transform_system


@dataclass
class Report:
    verdict: str  # proved | conditional | unknown
    pre: tuple = ()
    bound: Bound = field(default_factory=lambda: Bound(None))
    transformed: TransitionSystem | None = None
    loops: list = field(default_factory=list)
    crs: CRS | None = None
    proofs: dict = field(default_factory=dict)
    splits: list = field(default_factory=list)
    diagnostics: list = field(default_factory=list)
    soundness: dict | None = None

    @property
    def degree(self):
        return asymptotic_degree(self.bound)

    def summary(self) -> dict:
        deg = self.degree
        return {
            "verdict": self.verdict,
            "precondition": conj_str(self.pre) if self.pre else None,
            "bound": str(self.bound),
            "degree": None if deg == float("inf") else deg,
            "proofs": [{"locations": sorted(k), "size": p.size(), "depth": p.depth()}
                       for k, p in sorted(self.proofs.items(), key=lambda kv: sorted(kv[0]))],
            "splits": self.splits,
            "transformed": None if self.transformed is None else {
                "locations": len(self.transformed.locations),
                "transitions": len(self.transformed.transitions),
                "sccs": sorted(sorted(c.locations) for c in sccs(self.transformed)),
            },
            "loops": [{"head": l.head, "rf": str(l.rf[l.head])} for L in self.loops for l in L.all()],
            "equations": None if self.crs is None else len(self.crs.equations),
            "diagnostics": list(self.diagnostics),
            "soundness": self.soundness,
        }


def analyze_ts(ts: TransitionSystem, *, cap: int = 32, embed_rf: bool = False,
               conditional: bool = False) -> Report:
    phases = analyze(ts)
    if phases.status == "failed":
        return Report("unknown", diagnostics=[f"no termination proof for {sorted(f)}" for f in phases.failed],
                      proofs=phases.proofs)
    verdict = "conditional" if phases.pre else "proved"
    tr = transform_system(phases.unfolded, cap=cap)
    rep = Report(verdict, phases.pre, transformed=tr.ts, loops=tr.loops, proofs=phases.proofs,
                 splits=list(tr.log.splits),
                 diagnostics=list(tr.diagnostics))
    if tr.diagnostics:
        return rep
    crs = generate_crs(tr.ts, tr.loops)
    if embed_rf:
        crs = embed_ranking_functions(crs, rf_annotation_of(tr.loops))
    if conditional or phases.pre:
        crs = make_conditional(crs, phases.pre)
    rep.crs = crs
    rep.bound = solve(tr.ts, tr.loops, phases.pre)
    return rep


def inner_size_relations(rep: Report) -> dict:
    """Size relations of every nested loop of the transformed system, by head."""
    out = {}
    ts = rep.transformed
    for L in rep.loops:
        for child in (c for l in L.all() for c in l.children):
            trs = [t for t in ts.transitions if t.source in child.locations]
            out[child.head] = size_relations(trs, ts.variables, child.head)
    return out


def check_soundness(ts: TransitionSystem, rep: Report, runs: int, seed: int = 0,
                    range_: int = 8, init_range: int = 20, step_cap: int = 10**6) -> dict:
    """Fuzz ``ts``: every terminated run from an initial state satisfying the
    precondition must take at most the reported bound."""
    rng = random.Random(seed)
    res = {"runs": 0, "terminated": 0, "cap_hits": 0, "skipped": 0, "violations": []}
    if not rep.bound.finite:
        res["skipped"] = runs
        return res
    for i in range(runs):
        init = {v: rng.randint(-init_range, init_range) for v in ts.variables}
        if rep.pre and not all(a.holds(init) for a in rep.pre):
            res["skipped"] += 1
            continue
        tr = run(ts, init, seed=rng.randrange(2**31), range=range_, step_cap=step_cap, record=False)
        res["runs"] += 1
        if not tr.terminated:
            res["cap_hits"] += 1
            continue
        res["terminated"] += 1
        b = eval_bound(rep.bound, init)
        if tr.steps > b:
            res["violations"].append({"run": i, "init": init, "steps": tr.steps, "bound": b})
    return res
