"""Analysis reports and their text, JSON and SARIF renderings."""

from __future__ import annotations

import json
import statistics
from dataclasses import dataclass, field, replace
from typing import Optional

from . import __version__
from .catalog import FINDING_CATEGORIES, SEVERITIES, load_catalog
from .checkers import Finding, Location

TOOL_NAME = "autocomply"
STAGES = ("open", "decode", "ccfg", "check")
SARIF_SCHEMA = "https://json.schemastore.org/sarif-2.1.0.json"
_LEVELS = {"violation": "error", "warning": "warning", "info": "note"}


@dataclass
class AppReport:
    origin: str
    timing: dict[str, float] = field(default_factory=dict)
    findings: list[Finding] = field(default_factory=list)
    errors: list[str] = field(default_factory=list)

    @property
    def total_time(self) -> float:
        return sum(self.timing.values())

    def count(self, severity: str) -> int:
        return sum(1 for f in self.findings if f.severity == severity)


@dataclass
class Report:
    apps: list[AppReport] = field(default_factory=list)
    tool_version: str = __version__

    @property
    def violations(self) -> int:
        return sum(a.count("violation") for a in self.apps)

    @property
    def errors(self) -> int:
        return sum(len(a.errors) for a in self.apps)

    def totals(self) -> dict[str, dict[str, int]]:
        out = {c: {s: 0 for s in SEVERITIES} for c in FINDING_CATEGORIES}
        for app in self.apps:
            for f in app.findings:
                out[f.category][f.severity] += 1
        return out

    def geomean_time(self) -> Optional[float]:
        times = [a.total_time for a in self.apps if not a.errors]
        if not times:
            return None
        # a zero factor makes the product, and so the mean, zero
        return statistics.geometric_mean(times) if min(times) > 0 else 0.0

    def summary(self) -> dict:
        return {
            "apps": len(self.apps),
            "errored_apps": sum(1 for a in self.apps if a.errors),
            "totals": self.totals(),
            "geomean_time_s": self.geomean_time(),
        }


def exit_status(report: Report) -> int:
    if report.errors:
        return 2
    return 1 if report.violations else 0


def mask_timing(report: Report) -> Report:
    """Copy of ``report`` with every timing value zeroed, for golden comparisons."""
    apps = [replace(a, timing={k: 0.0 for k in a.timing}) for a in report.apps]
    return replace(report, apps=apps)


# JSON

def _loc_to_json(loc: Location) -> dict:
    return {k: v for k, v in (("cls", loc.cls), ("method", loc.method), ("offset", loc.offset),
                              ("manifest", loc.manifest)) if v is not None}


def _finding_to_json(f: Finding) -> dict:
    return {
        "category": f.category, "rule_id": f.rule_id, "component": f.component, "callback": f.callback,
        "severity": f.severity, "message": f.message, "evidence": [_loc_to_json(e) for e in f.evidence],
    }


def report_to_json(report: Report) -> dict:
    return {
        "tool": {"name": TOOL_NAME, "version": report.tool_version},
        "apps": [{"origin": a.origin, "timing": dict(a.timing),
                  "findings": [_finding_to_json(f) for f in a.findings], "errors": list(a.errors)}
                 for a in report.apps],
        "summary": report.summary(),
    }


def emit_json(report: Report) -> str:
    return json.dumps(report_to_json(report), indent=2, sort_keys=True) + "\n"


def parse_json(text: str) -> Report:
    doc = json.loads(text)
    apps = []
    for a in doc["apps"]:
        findings = [Finding(f["category"], f["rule_id"], f["component"], f["callback"], f["severity"],
                            tuple(Location(**e) for e in f["evidence"]), f["message"]) for f in a["findings"]]
        apps.append(AppReport(a["origin"], dict(a["timing"]), findings, list(a["errors"])))
    return Report(apps, doc["tool"]["version"])


# text

def emit_text(report: Report) -> str:
    lines = [f"{TOOL_NAME} {report.tool_version}"]
    for app in report.apps:
        lines.append("")
        lines.append(f"app {app.origin}")
        if app.timing:
            lines.append("  timing " + " ".join(f"{k}={app.timing[k]:.3f}s" for k in STAGES if k in app.timing))
        for err in app.errors:
            lines.append(f"  error {err}")
        for f in app.findings:
            cb = f" {f.callback}" if f.callback else ""
            lines.append(f"  {f.severity} {f.category} {f.rule_id} {f.component}{cb}")
            lines.append(f"    {f.message}")
            for e in f.evidence:
                lines.append(f"    at {e}")
        lines.append(f"  {app.count('violation')} violations, {app.count('warning')} warnings, "
                     f"{app.count('info')} notes")
    s = report.summary()
    lines.append("")
    lines.append(f"summary {s['apps']} apps, {s['errored_apps']} with errors")
    for cat, counts in s["totals"].items():
        lines.append(f"  {cat} " + " ".join(f"{k}={v}" for k, v in counts.items()))
    gm = s["geomean_time_s"]
    lines.append("  geomean time " + ("n/a" if gm is None else f"{gm:.3f}s"))
    return "\n".join(lines) + "\n"


# SARIF

def _sarif_location(origin: str, loc: Location) -> dict:
    out: dict = {"physicalLocation": {"artifactLocation": {"uri": origin.replace("\\", "/")}}}
    if loc.manifest is not None:
        out["logicalLocations"] = [{"fullyQualifiedName": loc.manifest, "kind": "element"}]
    elif loc.method is not None:
        name = f"{loc.cls}.{loc.method}"
        out["logicalLocations"] = [{"fullyQualifiedName": name if loc.offset is None else f"{name}@{loc.offset}",
                                    "kind": "function"}]
    elif loc.cls is not None:
        out["logicalLocations"] = [{"fullyQualifiedName": loc.cls, "kind": "type"}]
    return out


def report_to_sarif(report: Report) -> dict:
    catalog = load_catalog()
    rules = [{
        "id": r.id,
        "name": r.name,
        "shortDescription": {"text": r.name},
        "fullDescription": {"text": r.description},
        "defaultConfiguration": {"level": _LEVELS[r.severity]},
        "properties": {"category": r.category},
    } for r in catalog.rules]
    index = {r.id: i for i, r in enumerate(catalog.rules)}
    results, notes = [], []
    for app in report.apps:
        for f in app.findings:
            results.append({
                "ruleId": f.rule_id,
                "ruleIndex": index[f.rule_id],
                "level": _LEVELS[f.severity],
                "message": {"text": f.message},
                "locations": [_sarif_location(app.origin, e) for e in f.evidence] or
                             [{"physicalLocation": {"artifactLocation": {"uri": app.origin}}}],
                "properties": {"category": f.category, "component": f.component,
                               **({"callback": f.callback} if f.callback else {})},
            })
        for err in app.errors:
            notes.append({"level": "error", "message": {"text": f"{app.origin}: {err}"}})
    return {
        "$schema": SARIF_SCHEMA,
        "version": "2.1.0",
        "runs": [{
            "tool": {"driver": {"name": TOOL_NAME, "version": report.tool_version, "rules": rules}},
            "invocations": [{"executionSuccessful": not notes, "toolExecutionNotifications": notes}],
            "results": results,
        }],
    }


def emit_sarif(report: Report) -> str:
    return json.dumps(report_to_sarif(report), indent=2, sort_keys=True) + "\n"


EMITTERS = {"text": emit_text, "json": emit_json, "sarif": emit_sarif}


def emit(report: Report, fmt: str) -> bytes:
    return EMITTERS[fmt](report).encode("utf-8")
