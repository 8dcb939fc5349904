"""Compliance checkers over the CCFG and manifest."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Optional

from .axml import AutoComponentRef, auto_components, declares_play_from_search
from .catalog import Catalog, CallbackSpec, load_catalog
from .ccfg import Ccfg, build_ccfg, callee_resolver, is_media_browser, near_misses
from .dex.model import INVOKE, MethodRef
from .errors import BudgetExceeded
from .model import AppModel
from .paths import (
    DEFAULT_INLINE_DEPTH, DEFAULT_PATH_BUDGET, DEFAULT_STEP_BUDGET, Budget, MustCall, ReturnNonNull,
    all_paths_satisfy, target_matches,
)

log = logging.getLogger(__name__)

ALL_CHECKERS = frozenset({"media", "ui", "voice", "disc"})
MANIFEST_APP = "/manifest/application"


@dataclass(frozen=True)
class Location:
    cls: Optional[str] = None
    method: Optional[str] = None
    offset: Optional[int] = None
    manifest: Optional[str] = None

    def key(self) -> tuple:
        return (self.cls or "", self.method or "", -1 if self.offset is None else self.offset, self.manifest or "")

    def __str__(self) -> str:
        if self.manifest is not None:
            return f"manifest:{self.manifest}"
        out = self.cls or ""
        if self.method:
            out += f"->{self.method}"
        if self.offset is not None:
            out += f"@{self.offset}"
        return out


@dataclass(frozen=True)
class Finding:
    category: str
    rule_id: str
    component: str
    callback: Optional[str]
    severity: str
    evidence: tuple[Location, ...]
    message: str

    def sort_key(self) -> tuple:
        return (self.category, self.component, self.rule_id, self.callback or "", self.message,
                tuple(e.key() for e in self.evidence))


@dataclass(frozen=True)
class CheckerConfig:
    checkers: frozenset[str] = ALL_CHECKERS
    inline_depth: int = DEFAULT_INLINE_DEPTH
    path_budget: int = DEFAULT_PATH_BUDGET
    step_budget: int = DEFAULT_STEP_BUDGET

    def budget(self) -> Budget:
        return Budget(self.path_budget, self.step_budget)


def _finding(catalog: Catalog, rule_id: str, component: str, callback: Optional[str],
             evidence, message: str) -> Finding:
    rule = catalog.rule(rule_id)
    return Finding(rule.category, rule_id, component, callback, rule.severity, tuple(evidence), message)


def sort_findings(findings) -> list[Finding]:
    return sorted(set(findings), key=Finding.sort_key)


def _method_loc(ref: MethodRef, offset: Optional[int] = None) -> Location:
    return Location(ref.owner, f"{ref.name}{ref.descriptor}", offset)


def _service_loc(component: str) -> Location:
    return Location(manifest=f"{MANIFEST_APP}/service[@name='{component}']")


def _components(model: AppModel) -> list[AutoComponentRef]:
    return auto_components(model.manifest)


def _unresolved(catalog: Catalog, comp: str) -> Finding:
    return _finding(catalog, "INFO-cannot-resolve-component", comp, None, [_service_loc(comp)],
                    f"service {comp} is declared in the manifest but its class is not in the app code; "
                    "code checks were skipped")


def _reaches(model: AppModel, ccfg: Ccfg, ref: MethodRef, depth: int, pred) -> bool:
    """Whether an invoke matching ``pred`` is reachable from ``ref`` within ``depth`` app calls."""
    callee = callee_resolver(model, ccfg)
    frontier = [ccfg.cfgs.get(ref)]
    seen = {ref}
    for level in range(depth + 1):
        nxt = []
        for cfg in frontier:
            if cfg is None:
                continue
            for insn in cfg.insns.values():
                if insn.kind != INVOKE or insn.target is None:
                    continue
                if pred(insn.target):
                    return True
                sub = callee(insn.target)
                if sub is not None and sub.method not in seen:
                    seen.add(sub.method)
                    nxt.append(sub)
        frontier = nxt
    return False


def check_media(ccfg: Ccfg, model: AppModel, config: CheckerConfig = CheckerConfig(),
                catalog: Optional[Catalog] = None) -> list[Finding]:
    catalog = catalog or load_catalog()
    out: list[Finding] = []
    for comp in _components(model):
        name = comp.class_name
        if not model.is_app_class(name):
            out.append(_unresolved(catalog, name))
            continue
        sessions = ccfg.session_classes.get(name, ())
        where = f"session callback {', '.join(sessions)}" if sessions else "no registered session callback"
        for spec in catalog.specs("media"):
            b = ccfg.binding(name, spec.name)
            if b is None:
                ev = [Location(name)] + [Location(s) for s in sessions]
                out.append(_finding(catalog, f"MEDIA-missing-{spec.name}", name, spec.name, ev,
                                    f"{spec.name} is not implemented ({where}); the host cannot drive this playback action"))
                continue
            if not _reaches(model, ccfg, b.method, config.inline_depth, lambda t: catalog.is_playback_api(t.name)):
                out.append(_finding(catalog, f"MEDIA-no-playback-logic-{spec.name}", name, spec.name,
                                    [Location(name), _method_loc(b.method, 0)],
                                    f"{spec.name} reaches no player or session call within {config.inline_depth} call levels"))
    return sort_findings(out)


def _ui_impl(ccfg: Ccfg, model: AppModel, catalog: Catalog, comp: str, spec: CallbackSpec, out: list[Finding]):
    b = ccfg.binding(comp, spec.name)
    if b is not None:
        return b
    wrong = near_misses(model, comp, spec)
    msg = f"{comp} does not implement {spec.name}; the host cannot browse the app's content"
    ev = [Location(comp)]
    if wrong:
        sigs = ", ".join(sorted(f"{m.name}{m.descriptor}" for m in wrong))
        msg = f"{comp} has no {spec.name} with the required signature (found {sigs})"
        ev += [_method_loc(m.ref) for m in wrong]
    out.append(_finding(catalog, f"UI-missing-{spec.name}", comp, spec.name, ev, msg))
    return None


def check_ui(ccfg: Ccfg, model: AppModel, config: CheckerConfig = CheckerConfig(),
             catalog: Optional[Catalog] = None) -> list[Finding]:
    catalog = catalog or load_catalog()
    out: list[Finding] = []
    callee = callee_resolver(model, ccfg)
    for comp in _components(model):
        name = comp.class_name
        if not model.is_app_class(name):
            out.append(_unresolved(catalog, name))
            continue
        if not is_media_browser(model, name, catalog):
            out.append(_finding(catalog, "UI-component-not-media-browser", name, None, [Location(name)],
                                f"{name} declares the media browser action but does not extend a media browser service"))
        for spec in catalog.specs("ui"):
            b = _ui_impl(ccfg, model, catalog, name, spec, out)
            if b is None:
                continue
            cfg = ccfg.cfgs[b.method]
            if spec.obligation == "all-paths-return-nonnull":
                obligation, rule = ReturnNonNull(), f"UI-null-root-{spec.name}"
                text = f"{spec.name} can return a null root on the path shown"
            else:
                obligation, rule = MustCall(spec.targets), f"UI-missing-sendResult-{spec.name}"
                text = f"{spec.name} can return without calling {' or '.join(spec.targets)} on the path shown"
            try:
                res = all_paths_satisfy(cfg, obligation, config.inline_depth, callee=callee, budget=config.budget())
            except BudgetExceeded as exc:
                out.append(_finding(catalog, "UI-inconclusive", name, spec.name, [_method_loc(b.method, 0)],
                                    f"analysis of {spec.name} was inconclusive: {exc}"))
                continue
            if not res.satisfied:
                out.append(_finding(catalog, rule, name, spec.name,
                                    [_method_loc(b.method, o) for o in res.witness], text))
            elif spec.deferring_targets and _reaches(
                    model, ccfg, b.method, config.inline_depth,
                    lambda t: target_matches(t, frozenset(spec.deferring_targets))):
                out.append(_finding(catalog, "UI-deferred-sendResult", name, spec.name, [_method_loc(b.method, 0)],
                                    f"{spec.name} defers delivery with {' or '.join(spec.deferring_targets)}; "
                                    "the result must be sent later"))
            if obligation == ReturnNonNull() and not any(len(s) > 1 for s in cfg.succ.values()):
                out.append(_finding(catalog, "UI-no-client-validation", name, spec.name, [_method_loc(b.method, 0)],
                                    f"{spec.name} returns a root without branching on the caller"))
    return sort_findings(out)


def check_voice(ccfg: Ccfg, model: AppModel, config: CheckerConfig = CheckerConfig(),
                catalog: Optional[Catalog] = None) -> list[Finding]:
    catalog = catalog or load_catalog()
    out: list[Finding] = []
    has_filter = declares_play_from_search(model.manifest)
    for comp in _components(model):
        name = comp.class_name
        if not has_filter:
            out.append(_finding(catalog, "VOICE-missing-intent-filter", name, None, [Location(manifest=MANIFEST_APP)],
                                "no component declares the media play-from-search intent filter; "
                                "voice search cannot reach the app"))
        if not model.is_app_class(name):
            continue
        sessions = ccfg.session_classes.get(name, ())
        for spec in catalog.specs("voice"):
            b = ccfg.binding(name, spec.name)
            if b is None:
                where = f"session callback {', '.join(sessions)}" if sessions else "no registered session callback"
                out.append(_finding(catalog, f"VOICE-missing-{spec.name}", name, spec.name,
                                    [Location(name)] + [Location(s) for s in sessions],
                                    f"{spec.name} is not implemented ({where}); voice queries are dropped"))
                continue
            cfg = ccfg.cfgs[b.method]
            real = [i for i in cfg.insns.values() if i.kind == INVOKE and i.target is not None
                    and i.flavor != "super" and i.target.name != spec.name]
            if not real:
                out.append(_finding(catalog, f"VOICE-empty-{spec.name}", name, spec.name, [_method_loc(b.method, 0)],
                                    f"{spec.name} ignores the query; its body makes no calls"))
    return sort_findings(out)


def check_discoverability(model: AppModel, catalog: Optional[Catalog] = None) -> list[Finding]:
    catalog = catalog or load_catalog()
    comps = _components(model)
    meta = model.manifest.uses_auto_descriptor
    pkg = model.manifest.package_name
    if not comps and not meta:
        return [_finding(catalog, "INFO-not-auto-app", pkg, None, [Location(manifest="/manifest")],
                         "the app declares neither automotive meta-data nor a media browser service")]
    out = []
    if not meta:
        for comp in comps:
            out.append(_finding(catalog, "DISC-missing-automotive-metadata", comp.class_name, None,
                                [Location(manifest=MANIFEST_APP), _service_loc(comp.class_name)],
                                "the media browser service is declared but the automotive meta-data is missing"))
    if not comps:
        out.append(_finding(catalog, "DISC-missing-media-browser-service", pkg, None,
                            [Location(manifest=f"{MANIFEST_APP}/meta-data")],
                            "automotive meta-data is declared but no service exposes the media browser action"))
    return sort_findings(out)


def is_auto_app(model: AppModel) -> bool:
    return bool(_components(model)) or model.manifest.uses_auto_descriptor


@dataclass
class Analysis:
    findings: list[Finding]
    ccfg: Optional[Ccfg] = None
    timing: dict[str, float] = field(default_factory=dict)


_CHECKS = {"media": check_media, "ui": check_ui, "voice": check_voice}


def analyze(model: AppModel, config: CheckerConfig = CheckerConfig(), clock=None) -> Analysis:
    """Manifest checks first; for Auto apps, build the CCFG and run the enabled checkers."""
    import time
    clock = clock or time.perf_counter
    catalog = load_catalog()
    unknown = set(config.checkers) - ALL_CHECKERS
    if unknown:
        raise ValueError(f"unknown checkers: {', '.join(sorted(unknown))}")
    findings = check_discoverability(model, catalog)
    if "disc" not in config.checkers:
        # the not-an-Auto-app note explains an empty report, so it stays
        findings = [f for f in findings if f.category != "discoverability"]
    if not is_auto_app(model):
        return Analysis(findings)
    t0 = clock()
    ccfg = build_ccfg(model, _components(model), catalog)
    t1 = clock()
    for key in ("media", "ui", "voice"):
        if key in config.checkers:
            findings.extend(_CHECKS[key](ccfg, model, config, catalog))
    t2 = clock()
    return Analysis(sort_findings(findings), ccfg, {"ccfg": t1 - t0, "check": t2 - t1})


def run_all(model: AppModel, config: CheckerConfig = CheckerConfig()) -> list[Finding]:
    return analyze(model, config).findings
