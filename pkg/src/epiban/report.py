"""Machine-readable reports.

Reports are JSON with sorted keys and a versioned ``format`` header.  The
only field that may differ between identical invocations is ``timing``.
"""
from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional

from .syntax import parse_core, print_core
from .system import InterpretedSystem, Point
from .trace import timeline

FORMAT = "epiban-report/1"


@dataclass
class Report:
    command: str
    scenario: Optional[str] = None
    scenario_sha256: Optional[str] = None
    flags: Dict = field(default_factory=dict)
    validation: Dict = field(default_factory=dict)
    results: List[Dict] = field(default_factory=list)
    witnesses: Dict[str, Dict] = field(default_factory=dict)
    summary: Dict = field(default_factory=dict)
    timing: Optional[Dict] = None

    def add_witness(self, sys: InterpretedSystem, result: Dict, p: Point, phi) -> str:
        wid = f"w{len(self.witnesses) + 1}"
        self.witnesses[wid] = {"result": result["id"], "run": p.run, "time": p.time,
                               "formula": print_core(phi), "timeline": timeline(sys, p.run)}
        result["witness_id"] = wid
        return wid

    def as_dict(self, timing: bool = True) -> Dict:
        d = {"format": FORMAT, "command": self.command, "scenario": self.scenario,
             "scenario_sha256": self.scenario_sha256, "flags": self.flags,
             "validation": self.validation, "results": self.results,
             "witnesses": self.witnesses, "summary": self.summary}
        if timing and self.timing is not None:
            d["timing"] = self.timing
        return d

    def dumps(self, timing: bool = True) -> str:
        return json.dumps(self.as_dict(timing), sort_keys=True, indent=2) + "\n"


def file_digest(path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def load_report(path) -> Dict:
    d = json.loads(Path(path).read_text())
    if d.get("format") != FORMAT:
        raise ValueError(f"{path}: not an {FORMAT} report")
    return d


def strip_timing(text: str) -> str:
    d = json.loads(text)
    d.pop("timing", None)
    return json.dumps(d, sort_keys=True, indent=2) + "\n"


def witness_formula(report: Dict, wid: str):
    try:
        w = report["witnesses"][wid]
    except KeyError:
        known = ", ".join(sorted(report.get("witnesses", {}))) or "none"
        raise KeyError(f"unknown witness {wid!r} (report has: {known})") from None
    return Point(w["run"], w["time"]), parse_core(w["formula"])
