import pytest

from autocomply.axml import auto_components
from autocomply.catalog import load_catalog
from autocomply.ccfg import (
    HOST, INSTRUCTION, METHOD_ENTRY, augment_with_host, build_ccfg, construct_base_icfg, discover_session_classes,
    dump_ccfg, entry_id, host_id, insn_id,
)
from autocomply.dex.model import RETURN, MethodRef
from autocomply.fixture import load_text_fixture
from conftest import ALL_YAML, apk_model, both_models, text_model

PKG = "com.example.music"
SVC = f"{PKG}.MusicService"
CB = f"{SVC}$SessionCallback"
COMPAT = "androidx/media/MediaBrowserServiceCompat"

# (component, implemented spec) pairs counted by hand from each fixture source
HOST_EDGES = {
    "broken_app": 7, "diamond": 0, "fixed_app": 9, "hierarchy": 9, "listing1": 0, "listing1_no_filter": 0,
    "listing1_no_meta": 0, "multidex": 9, "non_auto": 0, "two_services": 10, "unresolved": 9,
    "m1_missing_onstop": 8, "m2_missing_skip": 7, "m3_inherited_missing_mediaid": 8,
    "m4_empty_pause_missing_stop": 8, "u1_missing_browser_callbacks": 7, "u2_null_root": 9,
    "u3_branch_without_sendresult": 9, "u4_wrong_root_signature": 8, "v1_missing_search_filter": 9,
    "v2_missing_onplayfromsearch": 8, "v3_empty_onplayfromsearch": 9, "v4_no_filter_no_handler": 8,
}
# host nodes = 3 sources x auto components, unresolved ones included
HOST_NODES = {"two_services": 6, "unresolved": 6, "listing1": 3, "listing1_no_meta": 3,
              "listing1_no_filter": 0, "non_auto": 0, "diamond": 0}


def all_models():
    for path in ALL_YAML:
        yield pytest.param(path, "text", id=f"{path.stem}-text")
        if path.with_suffix(".apk").exists():
            yield pytest.param(path, "apk", id=f"{path.stem}-apk")


def load(path, frontend):
    return text_model(path.stem, path.parent) if frontend == "text" else apk_model(path.stem, path.parent)


def graph(model):
    return build_ccfg(model, auto_components(model.manifest))


def test_census_covers_every_fixture():
    assert sorted(HOST_EDGES) == sorted(p.stem for p in ALL_YAML)


@pytest.mark.parametrize("path,frontend", list(all_models()))
def test_algebra(path, frontend):
    model = load(path, frontend)
    comps = auto_components(model.manifest)
    base = construct_base_icfg(model)
    g = augment_with_host(base, comps, load_catalog().callbacks, model)

    # set equation, literally
    assert g.nodes == g.base_nodes | g.host_nodes
    assert g.edges == g.base_edges | g.host_edges
    assert not g.base_nodes & g.host_nodes
    assert not g.base_edges & g.host_edges
    assert (g.base_nodes, g.base_edges) == (base.base_nodes, base.base_edges)

    # host edges run from host nodes to method entries
    host_ids = {n.id for n in g.host_nodes}
    entries = {n.id for n in g.base_nodes if n.kind == METHOD_ENTRY}
    assert all(a in host_ids and b in entries for a, b in g.host_edges)
    assert all(n.kind == HOST and n.method is None for n in g.host_nodes)
    # base edges stay inside the base graph
    base_ids = {n.id for n in g.base_nodes}
    assert all(a in base_ids and b in base_ids for a, b in g.base_edges)

    # instruction nodes point at real offsets
    for n in g.base_nodes:
        if n.kind == INSTRUCTION:
            assert n.offset in g.cfg(n.method).insns

    # idempotence
    again = augment_with_host(g, comps, load_catalog().callbacks, model)
    assert again.same_graph(g)
    assert dump_ccfg(again) == dump_ccfg(g)

    assert len(g.host_edges) == HOST_EDGES[path.stem] == len(g.bindings)
    assert len(g.host_nodes) == HOST_NODES.get(path.stem, 3)


@pytest.mark.parametrize("path", [p for p in ALL_YAML if p.with_suffix(".apk").exists()], ids=lambda p: p.stem)
def test_host_layer_is_frontend_independent(path):
    t, b = (graph(m) for m in both_models(path.stem, path.parent))
    assert t.host_nodes == b.host_nodes and t.host_edges == b.host_edges
    assert {e.id for e in t.base_nodes if e.kind == METHOD_ENTRY} == {
        e.id for e in b.base_nodes if e.kind == METHOD_ENTRY}


def test_diamond_counts():
    cfg = construct_base_icfg(text_model("diamond")).cfg(MethodRef("com.example.diamond.Shape", "pick", "()V"))
    # hand-drawn: 0 branch -> 1 (A) and 3 (B); 1 call x -> 2 branch J -> 4; 3 call y falls into 4 return
    assert (len(cfg.nodes()), len(cfg.edges())) == (5, 5)
    assert cfg.edges() == [(0, 1), (0, 3), (1, 2), (2, 4), (3, 4)]


def test_empty_model_gives_empty_graph():
    g = graph(load_text_fixture("package: p"))
    assert not g.nodes and not g.edges


def test_no_auto_components_means_base_graph_only():
    model = text_model("fixed_app")
    base = construct_base_icfg(model)
    g = augment_with_host(base, [], load_catalog().callbacks, model)
    assert g.same_graph(base) and not g.host_nodes and not g.host_edges


def test_listing3_shape():
    for model in both_models("fixed_app"):
        g = graph(model)
        root = g.binding(SVC, "onGetRoot").method
        assert g.node(entry_id(root)).kind == METHOD_ENTRY
        assert len(g.cfg(root).returns()) >= 2
        ui = host_id(SVC, "UI-request")
        assert (ui, entry_id(root)) in g.host_edges
        assert (ui, entry_id(g.binding(SVC, "onLoadChildren").method)) in g.host_edges


def test_call_edges_and_framework_annotations():
    model = text_model("fixed_app")
    g = construct_base_icfg(model)
    load = MethodRef(SVC, "onLoadChildren", f"(Ljava/lang/String;L{COMPAT}$Result;)V")
    items = MethodRef(SVC, "loadMediaItems", "()Ljava/util/List;")
    assert (insn_id(load, 0), entry_id(items)) in g.base_edges
    assert g.annotations[insn_id(load, 1)] == (
        MethodRef("androidx.media.MediaBrowserServiceCompat$Result", "sendResult", "(Ljava/lang/Object;)V"),)
    assert insn_id(load, 0) not in g.annotations


PLAY_PAUSE = f"""
package: {PKG}
services: [{{name: .MusicService, actions: [android.media.browse.MediaBrowserService]}}]
classes:
  - name: {SVC}
    super: androidx.media.MediaBrowserServiceCompat
    methods:
      - name: onCreate
        descriptor: ()V
        insns:
          - call {CB}-><init>()V
          - call android.support.v4.media.session.MediaSessionCompat->setCallback(Landroid/support/v4/media/session/MediaSessionCompat$Callback;)V
          - return
  - name: {CB}
    super: android.support.v4.media.session.MediaSessionCompat$Callback
    methods:
      - {{name: <init>, descriptor: ()V, insns: [return]}}
      - {{name: onPlay, descriptor: ()V, insns: [return]}}
      - {{name: onPause, descriptor: ()V, insns: [return]}}
      - {{name: onStop, descriptor: (I)V, insns: [return]}}
      - {{name: onSkipToNext, descriptor: ()V}}
"""


def test_exactly_play_and_pause():
    g = graph(load_text_fixture(PLAY_PAUSE))
    event = host_id(SVC, "host-event")
    assert len(g.host_edges) == 2
    assert {a for a, _ in g.host_edges} == {event}
    assert {g.node(b).method.name for _, b in g.host_edges} == {"onPlay", "onPause"}
    assert {(b.callback, b.source) for b in g.bindings} == {("onPlay", "host-event"), ("onPause", "host-event")}


def test_session_discovery_prefers_registered_class():
    for model in both_models("fixed_app"):
        g = construct_base_icfg(model)
        assert discover_session_classes(model, g, SVC) == (CB,)


def test_session_discovery_through_reachable_helper():
    model = load_text_fixture(f"""
package: {PKG}
services: [{{name: .MusicService, actions: [android.media.browse.MediaBrowserService]}}]
classes:
  - name: {SVC}
    super: androidx.media.MediaBrowserServiceCompat
    methods:
      - {{name: onCreate, descriptor: ()V, insns: ['call {SVC}->setup()V', return]}}
      - name: setup
        descriptor: ()V
        insns:
          - call {PKG}.Decoy-><init>()V
          - call {CB}-><init>()V
          - call android.media.session.MediaSession->setCallback(Landroid/media/session/MediaSession$Callback;)V
          - return
  - name: {PKG}.Decoy
    methods: [{{name: <init>, descriptor: ()V, insns: [return]}}, {{name: onPlay, descriptor: ()V, insns: [return]}}]
  - name: {CB}
    super: android.media.session.MediaSession$Callback
    methods: [{{name: <init>, descriptor: ()V, insns: [return]}}, {{name: onPlay, descriptor: ()V, insns: [return]}}]
""")
    assert discover_session_classes(model, construct_base_icfg(model), SVC) == (CB,)


def test_session_discovery_falls_back_to_reachable_overriders():
    model = load_text_fixture(f"""
package: {PKG}
classes:
  - name: {SVC}
    super: androidx.media.MediaBrowserServiceCompat
    methods:
      - {{name: onCreate, descriptor: ()V, insns: ['call {CB}->onPlay()V', return]}}
  - name: {CB}
    methods: [{{name: onPlay, descriptor: ()V, insns: [return]}}]
  - name: {PKG}.Unreached
    methods: [{{name: onPause, descriptor: ()V, insns: [return]}}]
""")
    assert discover_session_classes(model, construct_base_icfg(model), SVC) == (CB,)


def test_binary_session_discovery_tracks_registers():
    # in the binary fixture the callback object flows through a register into setCallback
    model = apk_model("fixed_app")
    g = construct_base_icfg(model)
    on_create = next(m for m in model.by_name[SVC].methods if m.name == "onCreate")
    calls = [i for i in on_create.code.instructions if i.target is not None and i.target.name == "setCallback"]
    assert len(calls) == 1 and len(calls[0].args) == 2
    assert discover_session_classes(model, g, SVC) == (CB,)


def test_dump_format():
    g = graph(text_model("diamond"))
    text = dump_ccfg(g)
    lines = text.splitlines()
    assert lines == sorted(lines) and text.endswith("\n")
    pick = "com.example.diamond.Shape->pick()V"
    assert f"node {pick} method-entry method={pick}" in lines
    assert f"node {pick}@0 instruction method={pick} offset=0" in lines
    assert f"edge {pick} {pick}@0 base" in lines
    # x is not declared anywhere in the app, so the call stays a leaf annotation
    assert f"call {pick}@1 com.example.diamond.Shape->x()V" in lines
    assert sum(1 for ln in lines if ln.startswith("edge")) == len(g.edges)
    assert sum(1 for ln in lines if ln.startswith("node")) == len(g.nodes)
    host = dump_ccfg(graph(text_model("fixed_app")))
    assert f"node host:{SVC}:assistant host source=assistant" in host.splitlines()
    assert any(ln.startswith(f"edge host:{SVC}:UI-request ") and ln.endswith(" host") for ln in host.splitlines())


def test_returns_of_every_cfg_are_return_instructions():
    g = graph(text_model("two_services"))
    for cfg in g.cfgs.values():
        assert all(cfg.insns[r].kind == RETURN for r in cfg.returns())
        assert all(not cfg.succ[r] for r in cfg.returns())
