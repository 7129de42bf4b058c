"""Command-line front end.

Exit codes: 0 valid (or nothing to report), 1 invalid, 2 error.
"""
from __future__ import annotations

import argparse
import sys as _sys
import time
from dataclasses import replace
from fractions import Fraction
from pathlib import Path
from typing import List, Optional

from .evaluator import HorizonExceeded, evaluator_for
from .report import Report, file_digest, load_report, witness_formula
from .scenario import ScenarioError, load_scenario
from .soundness import (AUTO_DEPTH, auto_instances, check_soundness, parse_substitutions)
from .syntax import (ParseError, node_count, parse_ban, parse_core, print_core)
from .system import BuildError, ZeroConditioning, build_system
from .trace import render_trace
from .translate import (RULES, TranslationParams, print_subst, translate_formula,
                        translate_rule_instance)
from .validation import validate_scenario

EXIT_VALID, EXIT_INVALID, EXIT_ERROR = 0, 1, 2


def _flags(ap: argparse.ArgumentParser, scenario: bool = True):
    g = ap.add_argument_group("translation")
    g.add_argument("--fresh-window", "-l", type=int, default=None, metavar="L",
                   help="freshness / honesty window (default: scenario's)")
    g.add_argument("--alpha", type=Fraction, default=Fraction(0),
                   help="belief threshold slack; nonzero is experimental")
    g.add_argument("--said", choices=("primary", "alt"), default="primary")
    g.add_argument("--sees", choices=("primary", "alt"), default="primary")
    g.add_argument("--box-key", action="store_true", help="good keys stay good (prefix G)")
    g.add_argument("--server-key", metavar="S", default=None,
                   help="agent allowed to hold every good key")
    if scenario:
        ap.add_argument("--horizon", type=int, default=None, help="override the scenario horizon")
        ap.add_argument("--skip-validate", action="store_true",
                        help="check even if the scenario fails validation")
        ap.add_argument("-o", "--output", type=Path, default=None, help="write a JSON report")
        ap.add_argument("--no-timing", action="store_true", help="omit the timing field")


def _params(args, agents, fresh) -> TranslationParams:
    l = args.fresh_window if args.fresh_window is not None else fresh
    return TranslationParams(agents, l=l, alpha=args.alpha, said=args.said, sees=args.sees,
                             box_key=args.box_key, server=args.server_key)


def _flag_dict(args) -> dict:
    out = {}
    for k in ("horizon", "fresh_window", "alpha", "said", "sees", "box_key", "server_key",
              "skip_validate", "auto", "rules", "ban", "subst"):
        if hasattr(args, k):
            v = getattr(args, k)
            out[k] = str(v) if isinstance(v, (Fraction, Path)) else v
    return out


def _load(args):
    spec = load_scenario(args.scenario)
    if args.horizon is not None:
        spec.horizon = args.horizon
    if args.fresh_window is not None:
        spec.fresh = args.fresh_window
    return build_system(spec)


def _validation(sys, args, rep: Report) -> bool:
    if args.skip_validate:
        rep.validation = {"skipped": True, "diagnostics": []}
        return True
    diags = validate_scenario(sys)
    rep.validation = {"skipped": False, "diagnostics": [d.as_dict() for d in diags]}
    return not diags


def _finish(rep: Report, args, t0: float, code: int) -> int:
    rep.timing = {"seconds": round(time.perf_counter() - t0, 3)}
    if getattr(args, "output", None):
        args.output.write_text(rep.dumps(timing=not args.no_timing))
    return code


def _parse_formula(text: str, ban: bool, params):
    if not ban:
        try:
            return parse_core(text)
        except ParseError as core_err:
            try:
                f = parse_ban(text)
            except ParseError:
                raise core_err from None
            return translate_formula(f, params)
    return translate_formula(parse_ban(text), params)


# ------------------------------------------------------------------ check

def cmd_check(args) -> int:
    t0 = time.perf_counter()
    rep = Report("check", str(args.scenario), file_digest(args.scenario), _flag_dict(args))
    sys = _load(args)
    params = replace(_params(args, sys.agents, sys.fresh), quote=sys.params)
    phi = _parse_formula(args.formula, args.ban, params)
    result = {"id": "check", "formula": print_core(phi)}
    rep.results.append(result)
    if not _validation(sys, args, rep):
        result.update(status="error", detail="scenario failed validation (see diagnostics)")
        for d in rep.validation["diagnostics"]:
            print(f"validation: [{d['code']}] {d['message']}", file=_sys.stderr)
        print("error: scenario failed validation; pass --skip-validate to check anyway")
        return _finish(rep, args, t0, EXIT_ERROR)
    v = evaluator_for(sys).valid(phi, horizon_safe=args.horizon_safe)
    result.update(v.as_dict())
    rep.summary = {"status": v.status}
    if v.status == "valid":
        print(f"valid ({v.checked} points checked)")
        return _finish(rep, args, t0, EXIT_VALID)
    if v.status == "error":
        print(f"error at {v.witness}: {v.detail}")
        return _finish(rep, args, t0, EXIT_ERROR)
    wid = rep.add_witness(sys, result, v.witness, phi)
    print(f"invalid: counterexample {wid} at {v.witness}")
    print(render_trace(sys, v.witness, phi), end="")
    return _finish(rep, args, t0, EXIT_INVALID)


# -------------------------------------------------------------- translate

def cmd_translate(args) -> int:
    agents = args.agents
    fresh = 0
    if args.scenario:
        spec = load_scenario(args.scenario)
        agents = agents or spec.agents
        fresh = spec.fresh
    if not agents:
        print("error: give --agents or --scenario", file=_sys.stderr)
        return EXIT_ERROR
    params = _params(args, agents, fresh)
    F = parse_ban(args.formula)
    out = translate_formula(F, params)
    if params.experimental:
        print("# note: alpha > 0 is experimental; rule soundness is not claimed", file=_sys.stderr)
    print(print_core(out))
    if args.stats:
        n_in, n_out = node_count(F), node_count(out)
        printed = len(print_core(out))
        print(f"# nodes(F) = {n_in}  nodes(F^T) = {n_out}  ratio = {n_out / n_in:.2f}  "
              f"printed chars = {printed}")
    return EXIT_VALID


# ------------------------------------------------------------- soundness

def cmd_soundness(args) -> int:
    t0 = time.perf_counter()
    rep = Report("soundness", str(args.scenario), file_digest(args.scenario), _flag_dict(args))
    sys = _load(args)
    params = _params(args, sys.agents, sys.fresh)
    rules = tuple(args.rules.split(",")) if args.rules else RULES
    for r in rules:
        if r not in RULES:
            print(f"error: unknown rule {r!r}", file=_sys.stderr)
            return EXIT_ERROR
    if args.subst and not args.auto:
        instances = parse_substitutions(Path(args.subst).read_text())
    else:
        instances = auto_instances(sys, rules, args.depth)
    _validation(sys, args, rep)
    if params.experimental:
        rep.summary["note"] = "alpha > 0: verdicts are informational"
    res = check_soundness(sys, rules, instances, params, args.skip_validate)
    by_key = {(r, print_subst(r, s)): s for r, s in instances}
    counts = {}
    code = EXIT_VALID
    for n, r in enumerate(res, 1):
        d = r.as_dict()
        d["id"] = f"i{n}"
        rep.results.append(d)
        counts[r.status] = counts.get(r.status, 0) + 1
        if r.status == "invalid":
            phi = translate_rule_instance(r.rule, by_key[r.key], replace(params, quote=sys.params))
            rep.add_witness(sys, d, r.witness, phi)
            code = max(code, EXIT_INVALID)
        elif r.status == "error":
            code = EXIT_ERROR
        mark = {"valid": "ok", "invalid": "FAIL", "error": "ERROR", "skipped": "skip"}[r.status]
        tail = f"  witness {r.witness}" if r.witness else ""
        tail += f"  {d['witness_id']}" if "witness_id" in d else ""
        if r.status in ("skipped", "error"):
            tail += f"  ({r.detail})"
        print(f"{mark:5} {r.rule}  {r.subst}{tail}")
    rep.summary.update(counts=counts, instances=len(res))
    print("summary: " + ", ".join(f"{k}={v}" for k, v in sorted(counts.items())))
    return _finish(rep, args, t0, code)


# ------------------------------------------------------------------ trace

def cmd_trace(args) -> int:
    report = load_report(args.report)
    p, phi = witness_formula(report, args.witness)
    scenario = report["scenario"]
    spec = load_scenario(scenario)
    flags = report.get("flags", {})
    if flags.get("horizon") is not None:
        spec.horizon = flags["horizon"]
    if flags.get("fresh_window") is not None:
        spec.fresh = flags["fresh_window"]
    sys = build_system(spec)
    print(f"report {args.report}  witness {args.witness}  scenario {scenario}")
    print(render_trace(sys, p, phi), end="")
    return EXIT_VALID


# --------------------------------------------------------------- validate

def cmd_validate(args) -> int:
    t0 = time.perf_counter()
    args.skip_validate = False
    rep = Report("validate", str(args.scenario), file_digest(args.scenario), _flag_dict(args))
    sys = _load(args)
    ok = _validation(sys, args, rep)
    for d in rep.validation["diagnostics"]:
        print(f"[{d['code']}] {d['message']}")
    rep.summary = {"status": "ok" if ok else "failed"}
    print("ok: all hypotheses hold" if ok else
          f"{len(rep.validation['diagnostics'])} diagnostic(s)")
    return _finish(rep, args, t0, EXIT_VALID if ok else EXIT_INVALID)


# ------------------------------------------------------------------- main

def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="epiban", description=__doc__,
                                 formatter_class=argparse.RawDescriptionHelpFormatter)
    sub = ap.add_subparsers(dest="cmd", required=True)

    p = sub.add_parser("check", help="check validity of a formula in a scenario")
    p.add_argument("scenario", type=Path)
    p.add_argument("formula", help="core-logic formula (BAN accepted; see --ban)")
    p.add_argument("--ban", action="store_true", help="parse the formula as BAN and translate")
    p.add_argument("--horizon-safe", action="store_true",
                   help="skip points where the formula would look past the horizon")
    _flags(p)
    p.set_defaults(fn=cmd_check)

    p = sub.add_parser("translate", help="translate a BAN formula to the core logic")
    p.add_argument("formula")
    p.add_argument("--agents", nargs="+", default=None)
    p.add_argument("--scenario", type=Path, default=None, help="take agents and l from a scenario")
    p.add_argument("--stats", action="store_true", help="print node counts")
    _flags(p, scenario=False)
    p.set_defaults(fn=cmd_translate)

    p = sub.add_parser("soundness", help="check translated rule instances")
    p.add_argument("scenario", type=Path)
    p.add_argument("--rules", default=None, help="comma-separated subset of R1..R9")
    p.add_argument("--subst", type=Path, default=None, help="substitution file")
    p.add_argument("--auto", action="store_true",
                   help="enumerate substitutions over the declared universe (default)")
    p.add_argument("--depth", type=int, default=AUTO_DEPTH, help="message depth bound for --auto")
    _flags(p)
    p.set_defaults(fn=cmd_soundness)

    p = sub.add_parser("trace", help="render a counterexample from a report")
    p.add_argument("report", type=Path)
    p.add_argument("witness", help="witness id, e.g. w1")
    p.set_defaults(fn=cmd_trace)

    p = sub.add_parser("validate", help="check the soundness hypotheses of a scenario")
    p.add_argument("scenario", type=Path)
    _flags(p)
    p.set_defaults(fn=cmd_validate)
    return ap


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.fn(args)
    except (ScenarioError, BuildError, ParseError, ValueError, KeyError, OSError,
            ZeroConditioning, HorizonExceeded) as e:
        msg = e.args[0] if isinstance(e, KeyError) and e.args else e
        print(f"error: {type(e).__name__}: {msg}", file=_sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    _sys.exit(main())
