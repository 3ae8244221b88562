"""Command-line front end.

Exit codes: 0 every requested certificate was obtained, 2 the candidate
was refuted (infeasible, membership excluded with exact generators, or a
sound sampled refutation), 3 inconclusive (certificate absent but nothing
refuted, or the search was sampling-limited), 1 usage or input error.
"""

from __future__ import annotations

import argparse
import json
import math
import sys

import numpy as np

from . import firstorder as fo
from . import registry
from . import secondorder as so
from .expr import ExprError
from .geometry import SamplingSpec, build_generator_set
from .oracle import TooFewFeasibleSamples, growth_probe
from .problem import (ProblemFormatError, ToleranceSet, activity,
                      check_feasible, evaluate_objective, load_problem_file,
                      problem_to_text)

SCHEMA_VERSION = 1

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_REFUTED = 2
EXIT_INCONCLUSIVE = 3


def _tolerances_from(args) -> ToleranceSet:
    return ToleranceSet(
        eps_active=args.eps_active, eps_rank=args.eps_rank,
        eps_det=args.eps_det, eps_feas=args.eps_feas, eps_pos=args.eps_pos)


def _add_tolerance_flags(p):
    tol = ToleranceSet()
    p.add_argument("--eps-active", type=float, default=tol.eps_active)
    p.add_argument("--eps-rank", type=float, default=tol.eps_rank)
    p.add_argument("--eps-det", type=float, default=tol.eps_det)
    p.add_argument("--eps-feas", type=float, default=tol.eps_feas)
    p.add_argument("--eps-pos", type=float, default=tol.eps_pos)


def _parse_point(text: str) -> tuple:
    try:
        return tuple(float(v) for v in text.split(","))
    except ValueError:
        raise SystemExit(f"error: bad point {text!r}; expected "
                         f"comma-separated numbers")


def _load(args):
    tol = _tolerances_from(args)
    if args.registry:
        problem, candidate, sampling = registry.get(
            args.registry, dim=args.dim, tolerances=tol)
    elif args.file:
        problem = load_problem_file(args.file, tolerances=tol)
        candidate = None
        sampling = SamplingSpec()
    else:
        raise SystemExit("error: give --file PATH or --registry NAME")
    sampling = SamplingSpec(
        soc_dirs=args.soc_dirs, sdp_dirs=args.sdp_dirs, seed=args.seed,
        soc_extra=sampling.soc_extra, sdp_extra=sampling.sdp_extra)
    if args.at is not None:
        candidate = _parse_point(args.at)
    if candidate is None:
        raise SystemExit("error: no candidate point; give --at \"v1,v2,...\"")
    if len(candidate) != problem.d:
        raise SystemExit(f"error: candidate has {len(candidate)} components, "
                         f"problem dimension is {problem.d}")
    return problem, np.asarray(candidate, dtype=float), sampling


def _json_default(v):
    if isinstance(v, float) and math.isinf(v):
        return "inf"
    raise TypeError(type(v))


def _print_human(report):
    out = []
    out.append(f"problem: {report['problem']['source']}  "
               f"(d={report['problem']['dim']}, {report['problem']['kind']})")
    out.append(f"candidate: {report['candidate']}  seed: {report['seed']}")
    feas = report["feasibility"]
    out.append(f"feasible: {feas['feasible']}"
               + ("" if feas["feasible"]
                  else f"  (max violation {feas['max_violation']:.3g})"))
    if "objective" in report:
        obj = report["objective"]
        act = ",".join(str(s["scenario"]) +
                       ("" if s["sign"] == 1 else "-") for s in obj["active"])
        out.append(f"objective value: {obj['value']:.12g}  active: {{{act}}}")
    if "necessary" in report and report["necessary"]:
        nec = report["necessary"]
        out.append(f"necessary (0 in D): {nec['zero_in_D']}")
        if nec.get("cadre"):
            c = nec["cadre"]
            dets = ", ".join(f"{v:.9g}" for v in c["determinants"])
            out.append(f"  cadre: p={c['p']} flavor={c['flavor']} "
                       f"complete={c['complete']}  determinants: [{dets}]")
        if nec.get("sampling_limited"):
            out.append("  note: sampling-limited search")
    if "sufficient" in report and report["sufficient"]:
        suf = report["sufficient"]
        out.append(f"sufficient (0 in int D): {suf['zero_in_int_D']}  "
                   f"radius: {suf['radius']}")
        if suf.get("complete_alternance"):
            c = suf["complete_alternance"]
            dets = ", ".join(f"{v:.9g}" for v in c["determinants"])
            out.append(f"  complete alternance ({c['flavor']}): "
                       f"determinants [{dets}]")
    if "flavor_search" in report and report["flavor_search"]:
        fl = report["flavor_search"]
        if fl["cadre"] is None:
            out.append(f"{fl['flavor']} cadre search: none found")
        else:
            c = fl["cadre"]
            word = "complete" if c["complete"] else f"{c['p']}-point"
            out.append(f"{fl['flavor']} cadre search: {word} cadre found")
            comp = fl.get("complete")
            if comp is not None and not c["complete"]:
                dets = ", ".join(f"{v:.9g}" for v in comp["determinants"])
                out.append(f"  complete {fl['flavor']} alternance found "
                           f"separately: determinants [{dets}]")
            elif comp is None:
                out.append(f"  no complete {fl['flavor']} alternance; "
                           f"{c['p']}-point cadre found")
    if "second_order" in report and report["second_order"]:
        for rec in report["second_order"]:
            out.append(f"second-order {rec['mode']}: passed={rec['passed']} "
                       f"refuted={rec['refuted']}"
                       + (" (trivial critical cone)"
                          if rec["critical_cone_trivial"] else ""))
    if "penalty" in report and report["penalty"]:
        pen = report["penalty"]
        out.append(f"penalty c={pen['c']}: value {pen['value']:.12g}, "
                   f"stationary inclusion: {pen['zero_in_subdiff']}")
    if "oracle" in report and report["oracle"]:
        orc = report["oracle"]
        if "error" in orc:
            out.append(f"oracle probe: {orc['error']}")
        else:
            out.append(f"oracle growth probe (order {orc['order']}): "
                       f"refuted={orc['refuted']} constant={orc['constant']}")
    flags = report.get("flags", {})
    if flags.get("convexity_declared_by_user") and \
            (report.get("necessary") or {}).get("zero_in_D"):
        out.append("note: with the user-declared convexity, the stationarity "
                   "certificate implies global optimality (declaration is "
                   "not verified)")
    out.append(f"verdict: exit {report['exit_code']}")
    print("\n".join(out))


def cmd_check(args) -> int:
    problem, x, sampling = _load(args)
    report = {
        "schema": SCHEMA_VERSION,
        "problem": {"source": problem.source, "dim": problem.d,
                    "kind": problem.kind},
        "candidate": list(map(float, x)),
        "seed": args.seed,
        "sampling": {"soc_dirs": sampling.soc_dirs,
                     "sdp_dirs": sampling.sdp_dirs, "seed": sampling.seed},
        "tolerances": {
            "eps_active": problem.tolerances.eps_active,
            "eps_rank": problem.tolerances.eps_rank,
            "eps_det": problem.tolerances.eps_det,
            "eps_feas": problem.tolerances.eps_feas,
            "eps_pos": problem.tolerances.eps_pos,
        },
        # regularity of the constraint system is never verified here, so
        # every converse direction that needs it stays conditional
        "flags": {
            "convexity_declared_by_user": bool(args.assume_convex),
            "rcq": "not checked",
        },
    }
    feas = check_feasible(problem, x)
    report["feasibility"] = {
        "feasible": feas.feasible, "max_violation": feas.max_violation,
        "violations": [{"where": w, "amount": a} for w, a in feas.violations]}
    if not feas.feasible:
        report["exit_code"] = EXIT_REFUTED
        _emit(args, report)
        return EXIT_REFUTED

    F, act_scen = evaluate_objective(problem, x)
    report["objective"] = {
        "value": F,
        "active": [{"scenario": s.index, "sign": s.sign, "value": s.value}
                   for s in act_scen]}

    nec = fo.necessary_check(problem, x, sampling)
    report["necessary"] = nec.to_json()
    suf = fo.sufficient_check(problem, x, sampling)
    report["sufficient"] = suf.to_json()

    refuted = False
    inconclusive = False
    if not nec.zero_in_D:
        if nec.sampling_limited:
            inconclusive = True
        else:
            refuted = True
    if not suf.zero_in_int_D and not refuted:
        inconclusive = True

    report["flavor_search"] = None
    if args.flavor:
        G = build_generator_set(problem, x, activity(problem, x), sampling)
        try:
            cadre = fo.find_cadre(G, args.flavor,
                                  eps_det=problem.tolerances.eps_det)
            complete = cadre
            if complete is None or not complete.complete:
                complete = fo.find_cadre(G, args.flavor, p_min=problem.d + 1,
                                         eps_det=problem.tolerances.eps_det)
        except fo.CombinatorialBudgetExceeded:
            cadre = None
            complete = None
            inconclusive = True
        report["flavor_search"] = {
            "flavor": args.flavor,
            "cadre": cadre.to_json() if cadre else None,
            "complete": complete.to_json() if complete else None}
        if complete is None:
            inconclusive = True

    report["second_order"] = None
    if args.second_order:
        report["second_order"] = []
        if nec.zero_in_D and nec.multipliers is not None:
            nec2 = so.second_order_necessary(problem, x, nec,
                                             sampling=sampling, seed=args.seed)
            suf2 = so.second_order_sufficient(problem, x, nec,
                                              sampling=sampling,
                                              seed=args.seed)
            report["second_order"] = [nec2.to_json(), suf2.to_json()]
            if nec2.refuted:
                refuted = True
            if not suf2.passed and not refuted:
                inconclusive = True
        else:
            inconclusive = True

    report["penalty"] = None
    if args.penalty is not None:
        pen = fo.penalty_subdiff_check(problem, x, args.penalty, sampling)
        report["penalty"] = pen.to_json()
        if not pen.zero_in_subdiff and not refuted:
            inconclusive = True

    report["oracle"] = None
    if args.oracle:
        try:
            probe = growth_probe(problem, x, order=1, seed=args.seed)
            report["oracle"] = probe.to_json()
            if probe.refuted:
                refuted = True
        except TooFewFeasibleSamples as err:
            report["oracle"] = {"error": str(err)}

    if refuted:
        code = EXIT_REFUTED
    elif inconclusive:
        code = EXIT_INCONCLUSIVE
    else:
        code = EXIT_OK
    report["exit_code"] = code
    _emit(args, report)
    return code


def _emit(args, report):
    if args.json:
        print(json.dumps(report, indent=2, default=_json_default))
    else:
        _print_human(report)
    if getattr(args, "out", None):
        with open(args.out, "w", encoding="utf-8") as fh:
            json.dump(report, fh, indent=2, default=_json_default)


def _parse_vectors(text: str):
    vectors = []
    for chunk in text.split(";"):
        chunk = chunk.strip()
        if not chunk:
            continue
        vectors.append([float(v) for v in chunk.split(",")])
    return vectors


def cmd_verify_alternance(args) -> int:
    if args.vectors_file:
        with open(args.vectors_file, "r", encoding="utf-8") as fh:
            text = ";".join(line.strip() for line in fh
                            if line.strip() and not line.startswith("#"))
    else:
        text = args.vectors
    if not text:
        print("error: give --vectors \"a,b;c,d;...\" or --vectors-file",
              file=sys.stderr)
        return EXIT_ERROR
    try:
        vectors = _parse_vectors(text)
    except ValueError:
        print("error: malformed vector input", file=sys.stderr)
        return EXIT_ERROR
    if not vectors or len({len(v) for v in vectors}) != 1:
        print("error: vectors must be non-empty and of equal length",
              file=sys.stderr)
        return EXIT_ERROR
    result = fo.verify_alternance(vectors, k0=args.k0, i0=args.i0,
                                  eps_det=args.eps_det, flavor=args.flavor)
    if isinstance(result, fo.Cadre):
        payload = {"schema": SCHEMA_VERSION, "accepted": True,
                   "cadre": result.to_json()}
        if args.json:
            print(json.dumps(payload, indent=2, default=_json_default))
        else:
            dets = ", ".join(f"{v:.9g}" for v in result.determinants)
            print(f"determinants: [{dets}]")
            mults = ", ".join(f"{v:.9g}" for v in result.multipliers)
            print(f"multipliers: [{mults}]")
            print(f"accepted: p={result.p} complete={result.complete}")
        return EXIT_OK
    payload = {"schema": SCHEMA_VERSION, "accepted": False,
               "reason": str(result)}
    if args.json:
        print(json.dumps(payload, indent=2))
    else:
        print(f"rejected: {result}")
    return EXIT_REFUTED


def cmd_discretize(args) -> int:
    tol = _tolerances_from(args)
    try:
        problem = load_problem_file(args.file, tolerances=tol)
    except (OSError, ProblemFormatError, ExprError) as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_ERROR
    x = _parse_point(args.at)
    if len(x) != problem.d:
        print(f"error: candidate has {len(x)} components, problem "
              f"dimension is {problem.d}", file=sys.stderr)
        return EXIT_ERROR
    discretized, actions = fo.semiinfinite_discretize(problem, x)
    for position, what, points in actions:
        if what == "dropped":
            print(f"warning: block {position} inactive at the point; dropped",
                  file=sys.stderr)
        elif what == "capped":
            print(f"warning: block {position} kept {len(points)} of its "
                  f"active points (cap d+1)", file=sys.stderr)
    text = problem_to_text(discretized)
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        print(text, end="")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="conecert",
        description="first- and second-order optimality certificates for "
                    "cone-constrained minimax and Chebyshev problems")
    sub = parser.add_subparsers(dest="command", required=True)

    p_check = sub.add_parser("check", help="certify a candidate point")
    p_check.add_argument("--file", help="problem file")
    p_check.add_argument("--registry", help="built-in problem name; one of: "
                         + ", ".join(registry.NAMES))
    p_check.add_argument("--dim", type=int, help="dimension for linf")
    p_check.add_argument("--at", help='candidate point "v1,v2,..."')
    p_check.add_argument("--flavor", choices=["plain", "generalised", "weak"],
                         help="also search a cadre of this flavor and "
                              "require completeness")
    p_check.add_argument("--second-order", action="store_true")
    p_check.add_argument("--penalty", type=float, metavar="C",
                         help="run the penalty stationarity check at C")
    p_check.add_argument("--oracle", action="store_true",
                         help="cross-check with the sampling growth probe")
    p_check.add_argument("--assume-convex", action="store_true",
                         help="record that the user declares the problem "
                              "convex; stationarity then implies global "
                              "optimality (the declaration is not verified)")
    p_check.add_argument("--json", action="store_true",
                         help="print the JSON report instead of text")
    p_check.add_argument("--out", help="also write the JSON report here")
    p_check.add_argument("--soc-dirs", type=int, default=64)
    p_check.add_argument("--sdp-dirs", type=int, default=64)
    p_check.add_argument("--seed", type=int, default=0)
    _add_tolerance_flags(p_check)
    p_check.set_defaults(func=cmd_check)

    p_ver = sub.add_parser("verify-alternance",
                           help="check the determinant conditions for "
                                "explicit vectors")
    p_ver.add_argument("--vectors", help='inline "a,b;c,d;..."')
    p_ver.add_argument("--vectors-file", help="one comma-separated vector "
                                              "per line")
    p_ver.add_argument("--k0", type=int, default=None)
    p_ver.add_argument("--i0", type=int, default=None)
    p_ver.add_argument("--flavor", default="plain",
                       choices=["plain", "generalised", "weak"])
    p_ver.add_argument("--eps-det", type=float, default=ToleranceSet().eps_det)
    p_ver.add_argument("--json", action="store_true")
    p_ver.set_defaults(func=cmd_verify_alternance)

    p_disc = sub.add_parser("discretize",
                            help="replace semi-infinite blocks by their "
                                 "active grid points")
    p_disc.add_argument("--file", required=True)
    p_disc.add_argument("--at", required=True)
    p_disc.add_argument("--out", help="output problem file (default stdout)")
    _add_tolerance_flags(p_disc)
    p_disc.set_defaults(func=cmd_discretize)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as err:
        # argparse exits 2 on usage errors; map that onto the error code
        return EXIT_OK if err.code in (0, None) else EXIT_ERROR
    try:
        return args.func(args)
    except SystemExit as err:
        if isinstance(err.code, str):
            print(err.code, file=sys.stderr)
            return EXIT_ERROR
        raise
    except (OSError, ProblemFormatError, ExprError, KeyError,
            fo.NotFeasible) as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
