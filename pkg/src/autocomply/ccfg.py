"""Car-control flow graph: an app ICFG plus host-driven entry points.

The base graph has one ``method-entry`` node per method with code, one
``instruction`` node per decoded instruction, intraprocedural edges, and
call edges to app methods. Framework calls stay on the call site as
annotations. Augmentation adds three host nodes per auto component (one
per host source) and an edge from the category's source to every
implemented callback.

Dump format (``dump_ccfg``), one record per line, sorted::

    node <id> <kind> [method=<owner->name desc>] [offset=<n>] [source=<s>]
    edge <src-id> <dst-id> base|host
    call <node-id> <owner->name desc>
"""

from __future__ import annotations

import logging
from collections import deque
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Optional

from .axml import AutoComponentRef
from .catalog import CallbackSpec, Catalog, load_catalog
from .dex.hierarchy import name_matches, superclass_chain
from .dex.model import INVOKE, DexClass, DexMethod, MethodRef
from .model import AppModel
from .paths import MethodCfg, build_method_cfg

log = logging.getLogger(__name__)

METHOD_ENTRY = "method-entry"
INSTRUCTION = "instruction"
HOST = "host"


@dataclass(frozen=True, order=True)
class CcfgNode:
    id: str
    kind: str
    method: Optional[MethodRef] = None
    offset: Optional[int] = None
    source: Optional[str] = None


@dataclass(frozen=True, order=True)
class HostBinding:
    """A callback implementation reached from a host source of one component."""

    component: str
    callback: str
    source: str
    method: MethodRef


def entry_id(ref: MethodRef) -> str:
    return str(ref)


def insn_id(ref: MethodRef, offset: int) -> str:
    return f"{ref}@{offset}"


def host_id(component: str, source: str) -> str:
    return f"host:{component}:{source}"


@dataclass(frozen=True, eq=False)
class Ccfg:
    base_nodes: frozenset[CcfgNode]
    base_edges: frozenset[tuple[str, str]]
    host_nodes: frozenset[CcfgNode] = frozenset()
    host_edges: frozenset[tuple[str, str]] = frozenset()
    cfgs: Mapping[MethodRef, MethodCfg] = field(default_factory=dict)
    # call-site node id -> framework / unresolved targets
    annotations: Mapping[str, tuple[MethodRef, ...]] = field(default_factory=dict)
    bindings: frozenset[HostBinding] = frozenset()
    session_classes: Mapping[str, tuple[str, ...]] = field(default_factory=dict)

    @property
    def nodes(self) -> frozenset[CcfgNode]:
        return self.base_nodes | self.host_nodes

    @property
    def edges(self) -> frozenset[tuple[str, str]]:
        return self.base_edges | self.host_edges

    def node(self, node_id: str) -> CcfgNode:
        return self._index[node_id]

    @property
    def _index(self) -> dict[str, CcfgNode]:
        idx = self.__dict__.get("_idx")
        if idx is None:
            idx = {n.id: n for n in self.nodes}
            object.__setattr__(self, "_idx", idx)
        return idx

    def binding(self, component: str, callback: str) -> Optional[HostBinding]:
        for b in self.bindings:
            if b.component == component and b.callback == callback:
                return b
        return None

    def cfg(self, ref: MethodRef) -> Optional[MethodCfg]:
        return self.cfgs.get(ref)

    def same_graph(self, other: "Ccfg") -> bool:
        return (self.base_nodes == other.base_nodes and self.base_edges == other.base_edges
                and self.host_nodes == other.host_nodes and self.host_edges == other.host_edges)


def construct_base_icfg(model: AppModel) -> Ccfg:
    nodes: set[CcfgNode] = set()
    edges: set[tuple[str, str]] = set()
    cfgs: dict[MethodRef, MethodCfg] = {}
    notes: dict[str, tuple[MethodRef, ...]] = {}
    for cls in model.classes:
        for m in cls.methods:
            if m.code is not None:
                cfgs[m.ref] = build_method_cfg(m.ref, m.code)
    for ref, cfg in cfgs.items():
        eid = entry_id(ref)
        nodes.add(CcfgNode(eid, METHOD_ENTRY, ref))
        if cfg.entry is not None:
            edges.add((eid, insn_id(ref, cfg.entry)))
        for off, insn in cfg.insns.items():
            nid = insn_id(ref, off)
            nodes.add(CcfgNode(nid, INSTRUCTION, ref, off))
            for s in cfg.succ[off]:
                edges.add((nid, insn_id(ref, s)))
            if insn.kind == INVOKE and insn.target is not None:
                callee = resolve_call(model, insn.target)
                if callee is not None and callee.ref in cfgs:
                    edges.add((nid, entry_id(callee.ref)))
                else:
                    notes[nid] = (insn.target,)
    return Ccfg(frozenset(nodes), frozenset(edges), cfgs=cfgs, annotations=notes)


def resolve_call(model: AppModel, target: MethodRef) -> Optional[DexMethod]:
    """Resolve an invoke target to app code, walking app superclasses."""
    return model.resolve(target.owner, target.name, target.descriptor)


def callee_resolver(model: AppModel, ccfg: Ccfg):
    def callee(ref: MethodRef) -> Optional[MethodCfg]:
        m = resolve_call(model, ref)
        return ccfg.cfgs.get(m.ref) if m is not None else None
    return callee


def find_implementation(model: AppModel, owner: str, spec: CallbackSpec) -> Optional[DexMethod]:
    """The method implementing ``spec`` in ``owner`` or an app superclass.

    Only methods with code count; a same-named method with a different
    signature is not an override.
    """
    by_name = model.by_name
    cur = by_name.get(owner)
    seen = set()
    while cur is not None and cur.name not in seen:
        seen.add(cur.name)
        for m in cur.find(spec.name):
            if m.code is not None and spec.matches(m.descriptor):
                return m
        cur = by_name.get(cur.superclass) if cur.superclass else None
    return None


def near_misses(model: AppModel, owner: str, spec: CallbackSpec) -> list[DexMethod]:
    """Same-named methods whose signature does not match the spec."""
    out = []
    by_name = model.by_name
    cur = by_name.get(owner)
    seen = set()
    while cur is not None and cur.name not in seen:
        seen.add(cur.name)
        out.extend(m for m in cur.find(spec.name) if not spec.matches(m.descriptor))
        cur = by_name.get(cur.superclass) if cur.superclass else None
    return out


def _class_and_supers(model: AppModel, name: str) -> list[DexClass]:
    cls = model.by_name.get(name)
    if cls is None:
        return []
    out = [cls]
    for sup in superclass_chain(cls, model.by_name):
        if sup in model.by_name:
            out.append(model.by_name[sup])
    return out


def reachable_methods(ccfg: Ccfg, roots: Iterable[MethodRef]) -> set[MethodRef]:
    """Methods whose entry is reachable over base edges from ``roots``."""
    start = [entry_id(r) for r in roots if r in ccfg.cfgs]
    succ: dict[str, list[str]] = {}
    for a, b in ccfg.base_edges:
        succ.setdefault(a, []).append(b)
    seen = set(start)
    queue = deque(start)
    while queue:
        n = queue.popleft()
        for s in succ.get(n, ()):
            if s not in seen:
                seen.add(s)
                queue.append(s)
    return {ccfg.node(n).method for n in seen if ccfg.node(n).kind == METHOD_ENTRY}


def _registered_classes(model: AppModel, ccfg: Ccfg, methods: Iterable[MethodRef], registration: str) -> set[str]:
    found = set()
    for ref in sorted(methods):
        cfg = ccfg.cfgs.get(ref)
        if cfg is None:
            continue
        constructed: dict[int, str] = {}
        last_init: Optional[str] = None
        for off in cfg.nodes():
            insn = cfg.insns[off]
            if insn.kind == INVOKE and insn.target is not None:
                t = insn.target
                if t.name == "<init>" and model.is_app_class(t.owner):
                    last_init = t.owner
                    if insn.args:
                        constructed[insn.args[0]] = t.owner
                elif t.name == registration:
                    cls = None
                    if len(insn.args) >= 2:
                        cls = constructed.get(insn.args[1])
                    if cls is None and not insn.args:
                        # text fixtures carry no registers
                        cls = last_init
                    if cls is not None:
                        found.add(cls)
            for r in insn.writes:
                constructed.pop(r, None)
    return found


def discover_session_classes(model: AppModel, ccfg: Ccfg, component: str,
                             catalog: Optional[Catalog] = None) -> tuple[str, ...]:
    """App classes acting as the media session callback of ``component``.

    Prefers classes passed to the session registration call in code reachable
    from the component; otherwise falls back to reachable app classes that
    override any session callback name.
    """
    catalog = catalog or load_catalog()
    roots = [m.ref for c in _class_and_supers(model, component) for m in c.methods if m.code is not None]
    reach = reachable_methods(ccfg, roots)
    registered = _registered_classes(model, ccfg, reach, catalog.session_registration)
    if registered:
        return tuple(sorted(registered))
    session_specs = [s for s in catalog.callbacks if s.owner_kind == "MediaSessionCallback"]
    reached_owners = {r.owner for r in reach}
    out = []
    for cls in model.classes:
        if cls.name not in reached_owners:
            continue
        if any(find_implementation(model, cls.name, s) is not None for s in session_specs):
            out.append(cls.name)
    if out:
        log.info("no session registration found for %s; using reachable callback classes %s", component, out)
    return tuple(sorted(out))


def session_bases(catalog: Catalog) -> tuple[str, ...]:
    return catalog.component_bases.get("MediaSessionCallback", ())


def augment_with_host(ccfg: Ccfg, components: list[AutoComponentRef], specs: Iterable[CallbackSpec],
                      model: AppModel, catalog: Optional[Catalog] = None) -> Ccfg:
    """Add host nodes and host-invocation edges. Idempotent."""
    catalog = catalog or load_catalog()
    specs = list(specs)
    host_nodes = set(ccfg.host_nodes)
    host_edges = set(ccfg.host_edges)
    bindings = set(ccfg.bindings)
    sessions = dict(ccfg.session_classes)
    sources = catalog.host_sources
    for comp in components:
        name = comp.class_name
        for src in sorted(set(sources.values())):
            host_nodes.add(CcfgNode(host_id(name, src), HOST, source=src))
        if not model.is_app_class(name):
            continue
        if name not in sessions:
            sessions[name] = discover_session_classes(model, ccfg, name, catalog)
        for spec in specs:
            owners = [name] if spec.owner_kind == "MediaBrowserService" else list(sessions[name])
            for owner in owners:
                impl = find_implementation(model, owner, spec)
                if impl is None or impl.ref not in ccfg.cfgs:
                    continue
                src = sources[spec.category]
                host_edges.add((host_id(name, src), entry_id(impl.ref)))
                bindings.add(HostBinding(name, spec.name, src, impl.ref))
                break
    return Ccfg(ccfg.base_nodes, ccfg.base_edges, frozenset(host_nodes), frozenset(host_edges),
                ccfg.cfgs, ccfg.annotations, frozenset(bindings), sessions)


def build_ccfg(model: AppModel, components: list[AutoComponentRef], catalog: Optional[Catalog] = None) -> Ccfg:
    catalog = catalog or load_catalog()
    return augment_with_host(construct_base_icfg(model), components, catalog.callbacks, model, catalog)


def dump_ccfg(ccfg: Ccfg) -> str:
    lines = []
    for n in ccfg.nodes:
        parts = ["node", n.id, n.kind]
        if n.method is not None:
            parts.append(f"method={n.method}")
        if n.offset is not None:
            parts.append(f"offset={n.offset}")
        if n.source is not None:
            parts.append(f"source={n.source}")
        lines.append(" ".join(parts))
    lines.extend(f"edge {a} {b} base" for a, b in ccfg.base_edges)
    lines.extend(f"edge {a} {b} host" for a, b in ccfg.host_edges)
    for nid, refs in ccfg.annotations.items():
        lines.extend(f"call {nid} {r}" for r in refs)
    return "\n".join(sorted(lines)) + "\n"


def is_media_browser(model: AppModel, class_name: str, catalog: Optional[Catalog] = None) -> bool:
    catalog = catalog or load_catalog()
    cls = model.by_name.get(class_name)
    if cls is None:
        return False
    bases = catalog.component_bases.get("MediaBrowserService", ())
    return any(name_matches(s, b) for s in superclass_chain(cls, model.by_name) for b in bases)
