"""Check R1-R9 over the bundled soundness fixtures and tabulate the outcome.

    python3 scripts/run_soundness.py [--said alt] [--reports DIR]
"""
from __future__ import annotations

import argparse
import contextlib
import io
import time
from collections import Counter
from dataclasses import replace
from pathlib import Path

from epiban.cli import main as cli_main
from epiban.scenario import load_scenario
from epiban.soundness import AUTO_DEPTH, check_soundness
from epiban.system import build_system
from epiban.translate import RULES

FIXTURES = Path(__file__).resolve().parent.parent / "src" / "epiban" / "fixtures"
FAMILY = ("keyexchange", "pubkey", "runenc")


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--said", choices=("primary", "alt"), default="primary")
    ap.add_argument("--depth", type=int, default=AUTO_DEPTH)
    ap.add_argument("--reports", type=Path, help="also write one JSON report per fixture here")
    args = ap.parse_args()

    print(f"{'fixture':12} " + " ".join(f"{r:>4}" for r in RULES) + "  valid skip  bad  secs")
    failed = 0
    for name in FAMILY:
        sys = build_system(load_scenario(FIXTURES / f"{name}.scn"))
        params = replace(sys.params, said=args.said)
        t0 = time.perf_counter()
        res = check_soundness(sys, params=params, depth=args.depth)
        dt = time.perf_counter() - t0
        per_rule = Counter(r.rule for r in res if r.status == "valid")
        status = Counter(r.status for r in res)
        bad = status["invalid"] + status["error"]
        failed += bad
        print(f"{name:12} " + " ".join(f"{per_rule[r]:>4}" for r in RULES)
              + f"  {status['valid']:>5} {status['skipped']:>4} {bad:>4}  {dt:4.1f}")
        if args.reports:
            args.reports.mkdir(parents=True, exist_ok=True)
            with contextlib.redirect_stdout(io.StringIO()):
                cli_main(["soundness", str(FIXTURES / f"{name}.scn"), "--said", args.said,
                          "--depth", str(args.depth), "-o", str(args.reports / f"{name}.json")])
    return 1 if failed else 0


if __name__ == "__main__":
    raise SystemExit(main())
