"""Command line driver: ``itscost analyze FILE [options]``."""
from __future__ import annotations

import argparse
import json
import signal
import sys

from .crs_gen import emit_crs
from .graph_analysis import CycleLimitExceeded
from .its_model import ITSSyntaxError, conj_str, emit_its, parse_its
from .pipeline import analyze_ts, check_soundness


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="itscost", description="Resource bounds for integer transition systems.")
    sub = p.add_subparsers(dest="command", required=True)
    a = sub.add_parser("analyze", help="prove termination and bound the number of transitions")
    a.add_argument("file")
    a.add_argument("--emit-transformed", action="store_true", help="print the loop-nested system")
    a.add_argument("--emit-crs", action="store_true", help="print the cost relation system")
    a.add_argument("--embed-rf", action="store_true", help="embed ranking functions into the CRS")
    a.add_argument("--conditional", action="store_true", help="wrap the CRS entry with the precondition")
    a.add_argument("--check-soundness", type=int, metavar="RUNS", default=0,
                   help="fuzz the input and compare step counts with the bound")
    a.add_argument("--seed", type=int, default=0)
    a.add_argument("--range", type=int, default=8, help="range of undefined values when fuzzing")
    a.add_argument("--init-range", type=int, default=20, help="range of initial values when fuzzing")
    a.add_argument("--step-cap", type=int, default=10**6, help="step limit per fuzzed run")
    a.add_argument("--cap", type=int, default=32, help="limit on transformation rounds")
    a.add_argument("--json", action="store_true", help="machine-readable report")
    a.add_argument("--timeout", type=float, default=300.0, help="wall-clock budget in seconds")
    return p


class _Timeout(Exception):
    pass


def _alarm(signum, frame):
    raise _Timeout()


def _print_text(rep, args, out):
    if rep.verdict == "conditional":
        out.write(f"termination: conditional, if {conj_str(rep.pre)}\n")
    else:
        out.write(f"termination: {rep.verdict}\n")
    deg = rep.degree
    if rep.bound.finite:
        cond = f" if {conj_str(rep.pre)}" if rep.pre else ""
        out.write(f"bound: O(N^{deg}){cond}\n")
        out.write(f"polynomial: {rep.bound}\n")
    else:
        out.write("bound: unknown\n")
    out.write(f"degree: {'inf' if deg == float('inf') else deg}\n")
    for d in rep.diagnostics:
        out.write(f"note: {d}\n")
    if args.emit_transformed and rep.transformed is not None:
        out.write("\n" + emit_its(rep.transformed))
    if args.emit_crs and rep.crs is not None:
        out.write("\n" + emit_crs(rep.crs))
    if rep.soundness is not None:
        s = rep.soundness
        out.write(f"soundness: {s['terminated']} terminated, {s['cap_hits']} cap hits, "
                  f"{s['skipped']} skipped, {len(s['violations'])} violations\n")


def main(argv=None, out=None) -> int:
    out = out or sys.stdout
    args = _parser().parse_args(argv)
    old = None
    if args.timeout and args.timeout > 0 and hasattr(signal, "SIGALRM"):
        old = signal.signal(signal.SIGALRM, _alarm)
        signal.setitimer(signal.ITIMER_REAL, args.timeout)
    try:
        try:
            with open(args.file) as fh:
                text = fh.read()
        except OSError as e:
            sys.stderr.write(f"error: {e}\n")
            return 1
        try:
            ts = parse_its(text)
        except ITSSyntaxError as e:
            sys.stderr.write(f"error: {args.file}: {e}\n")
            return 1
        try:
            rep = analyze_ts(ts, cap=args.cap, embed_rf=args.embed_rf, conditional=args.conditional)
        except CycleLimitExceeded as e:
            sys.stderr.write(f"limit exceeded: cycle enumeration ({e})\n")
            return 2
        if args.check_soundness:
            rep.soundness = check_soundness(ts, rep, args.check_soundness, seed=args.seed,
                                            range_=args.range, init_range=args.init_range,
                                            step_cap=args.step_cap)
        if args.json:
            data = rep.summary()
            if args.emit_transformed and rep.transformed is not None:
                data["transformed_its"] = emit_its(rep.transformed)
            if args.emit_crs and rep.crs is not None:
                data["crs"] = emit_crs(rep.crs)
            out.write(json.dumps(data, indent=2, sort_keys=True) + "\n")
        else:
            _print_text(rep, args, out)
        if rep.soundness is not None and rep.soundness["violations"]:
            return 1
        return 0 if rep.bound.finite else 2
    except _Timeout:
        sys.stderr.write(f"limit exceeded: timeout after {args.timeout} s\n")
        return 2
    finally:
        if old is not None:
            signal.setitimer(signal.ITIMER_REAL, 0)
            signal.signal(signal.SIGALRM, old)


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
