import dataclasses
import json
import random

import pytest
from hypothesis import given, settings, strategies as st

import pathoracle as po
from autocomply.axml import auto_components
from autocomply.catalog import load_catalog
from autocomply.ccfg import build_ccfg, callee_resolver
from autocomply.checkers import (
    CheckerConfig, Finding, Location, analyze, check_discoverability, check_media, check_ui, check_voice,
    run_all, sort_findings,
)
from autocomply.fixture import load_text_fixture
from conftest import ALL_YAML, APPS, CORPUS, apk_model, both_models, brief, text_model

PKG = "com.example.music"
SVC = f"{PKG}.MusicService"
CB = f"{SVC}$SessionCallback"
CENSUS = json.loads((CORPUS / "census.json").read_text())
SEVERE = ("violation", "warning")


def rules(findings, severity=None):
    return sorted(f.rule_id for f in findings if severity is None or f.severity == severity)


def graph(model):
    return build_ccfg(model, auto_components(model.manifest))


def all_models():
    for path in ALL_YAML:
        yield pytest.param(path, "text", id=f"{path.stem}-text")
        if path.with_suffix(".apk").exists():
            yield pytest.param(path, "apk", id=f"{path.stem}-apk")


def load(path, frontend):
    return text_model(path.stem, path.parent) if frontend == "text" else apk_model(path.stem, path.parent)


# --- motivating examples -----------------------------------------------------

def test_listing2_exact_ui_violations():
    for model in both_models("broken_app"):
        findings = run_all(model)
        assert [(f.rule_id, f.severity) for f in findings] == [
            ("UI-missing-onGetRoot", "violation"), ("UI-missing-onLoadChildren", "violation")]
        assert all(f.category == "T2-ui" and f.component == SVC for f in findings)


def test_listing3_is_clean():
    for model in both_models("fixed_app"):
        assert run_all(model) == []
        assert check_ui(graph(model), model) == []


def test_hierarchy_and_multidex_are_clean():
    for name in ("hierarchy", "multidex"):
        for model in both_models(name):
            assert run_all(model) == []


# --- discoverability ----------------------------------------------------------

def test_listing1_discoverability():
    for model in both_models("listing1"):
        assert check_discoverability(model) == []
    for name, rule in (("listing1_no_meta", "DISC-missing-automotive-metadata"),
                       ("listing1_no_filter", "DISC-missing-media-browser-service")):
        for model in both_models(name):
            found = check_discoverability(model)
            assert rules(found) == [rule] and found[0].severity == "violation"
            assert rules(run_all(model), "violation").count(rule) == 1


def test_plain_app_is_a_single_info():
    for model in both_models("non_auto"):
        findings = run_all(model)
        assert [(f.rule_id, f.severity) for f in findings] == [("INFO-not-auto-app", "info")]
        assert analyze(model).ccfg is None


# --- voice ----------------------------------------------------------------------

@pytest.mark.parametrize("name,rule", [("v1_missing_search_filter", "VOICE-missing-intent-filter"),
                                       ("v2_missing_onplayfromsearch", "VOICE-missing-onPlayFromSearch")])
def test_voice_root_causes(name, rule):
    for model in both_models(name, CORPUS):
        found = check_voice(graph(model), model)
        assert [(f.rule_id, f.severity, f.category) for f in found] == [(rule, "violation", "T3-voice")]


def test_voice_clean_and_empty_handler():
    model = text_model("fixed_app")
    assert check_voice(graph(model), model) == []
    for model in both_models("v3_empty_onplayfromsearch", CORPUS):
        found = check_voice(graph(model), model)
        assert [(f.rule_id, f.severity) for f in found] == [("VOICE-empty-onPlayFromSearch", "warning")]


# --- media ----------------------------------------------------------------------

def test_media_missing_onstop():
    model = text_model("m1_missing_onstop", CORPUS)
    assert rules(check_media(graph(model), model)) == ["MEDIA-missing-onStop"]


def test_media_empty_onplay_is_a_warning():
    fixed = text_model("fixed_app")
    assert check_media(graph(fixed), fixed) == []
    src = (APPS / "fixed_app.yaml").read_text()
    empty = src.replace("    - call com.example.music.Player->resume()V\n", "", 1)
    assert empty != src
    model = load_text_fixture(empty)
    found = check_media(graph(model), model)
    assert [(f.rule_id, f.severity) for f in found] == [("MEDIA-no-playback-logic-onPlay", "warning")]
    assert found[0].evidence[-1] == Location(CB, "onPlay()V", 0)


def test_media_reach_respects_inline_depth():
    # onPlay -> Player.resume (not a playback name) -> MediaPlayer.start: one app level
    model = text_model("fixed_app")
    g = graph(model)
    assert rules(check_media(g, model, CheckerConfig(inline_depth=0))) == ["MEDIA-no-playback-logic-onPlay"]
    assert check_media(g, model, CheckerConfig(inline_depth=1)) == []


# --- UI path obligations --------------------------------------------------------

def test_branch_without_sendresult_witness_matches_oracle():
    for model in both_models("u3_branch_without_sendresult", CORPUS):
        g = graph(model)
        found = check_ui(g, model)
        assert rules(found) == ["UI-missing-sendResult-onLoadChildren"]
        b = g.binding(SVC, "onLoadChildren")
        prog = po.Program(g.cfg(b.method), {})
        prog.callee = callee_resolver(model, g)
        ok, witness = po.oracle_call(prog, g.cfg(b.method), 3, frozenset({"sendResult", "detach"}))
        assert not ok
        assert tuple(e.offset for e in found[0].evidence) == witness
        assert all(e.cls == SVC and e.method.startswith("onLoadChildren(") for e in found[0].evidence)


def test_null_root_witness_matches_oracle():
    for model in both_models("u2_null_root", CORPUS):
        g = graph(model)
        found = check_ui(g, model)
        assert rules(found) == ["UI-null-root-onGetRoot"]
        ok, witness = po.oracle_nonnull(g.cfg(g.binding(SVC, "onGetRoot").method))
        assert not ok and tuple(e.offset for e in found[0].evidence) == witness


def test_budget_exhaustion_is_inconclusive_not_a_violation():
    for model in both_models("fixed_app"):
        found = check_ui(graph(model), model, CheckerConfig(path_budget=1))
        assert {f.rule_id for f in found} == {"UI-inconclusive"}
        assert all(f.severity == "info" for f in found)
        assert "inconclusive" in found[0].message


def test_detach_discharges_with_info_note():
    for model in both_models("u4_wrong_root_signature", CORPUS):
        found = check_ui(graph(model), model)
        assert [(f.rule_id, f.severity) for f in found] == [
            ("UI-deferred-sendResult", "info"), ("UI-missing-onGetRoot", "violation")]


def test_wrong_signature_is_named_in_the_message():
    model = text_model("u4_wrong_root_signature", CORPUS)
    (miss,) = [f for f in check_ui(graph(model), model) if f.rule_id == "UI-missing-onGetRoot"]
    assert "required signature" in miss.message and "onGetRoot(Ljava/lang/String;I)" in miss.message
    assert any(e.method and e.method.startswith("onGetRoot(Ljava/lang/String;I)") for e in miss.evidence)


def test_not_a_media_browser_and_no_validation_are_info():
    model = load_text_fixture(f"""
package: {PKG}
meta_data: [{{name: com.google.android.gms.car.application, resource: "@xml/automotive_app_desc"}}]
services: [{{name: .MusicService, actions: [android.media.browse.MediaBrowserService]}}]
classes:
  - name: {SVC}
    super: android.app.Service
    methods:
      - name: onGetRoot
        descriptor: (Ljava/lang/String;ILandroid/os/Bundle;)Landroidx/media/MediaBrowserServiceCompat$BrowserRoot;
        insns: ['call androidx.media.MediaBrowserServiceCompat$BrowserRoot-><init>(Ljava/lang/String;Landroid/os/Bundle;)V', return]
""")
    found = check_ui(graph(model), model)
    assert {(f.rule_id, f.severity) for f in found} == {
        ("UI-component-not-media-browser", "info"), ("UI-no-client-validation", "info"),
        ("UI-missing-onLoadChildren", "violation")}


def test_unresolved_component_reported_once():
    for model in both_models("unresolved"):
        findings = run_all(model)
        assert [(f.rule_id, f.component) for f in findings] == [
            ("INFO-cannot-resolve-component", f"{PKG}.GhostService")]


def test_two_components_are_checked_separately():
    model = text_model("two_services")
    findings = run_all(model)
    assert {f.component for f in findings} == {f"{PKG}.PodcastService"}
    assert "UI-missing-onLoadChildren" in rules(findings)
    assert "UI-missing-onGetRoot" not in rules(findings)


# --- corpus census --------------------------------------------------------------

def census_key(d):
    return (d["rule_id"], d["component"], d["callback"] or "", d["severity"])


@pytest.mark.parametrize("name", sorted(CENSUS))
def test_corpus_precision_and_recall(name):
    expected = {census_key(d) for d in CENSUS[name]}
    for model in both_models(name, CORPUS):
        got = {(f.rule_id, f.component, f.callback or "", f.severity) for f in run_all(model) if f.severity in SEVERE}
        tp = len(got & expected)
        assert tp / len(got) == 1.0 and tp / len(expected) == 1.0, (got, expected)


def test_corpus_has_four_apps_per_category():
    cats = sorted(n[0] for n in CENSUS)
    assert cats == ["m"] * 4 + ["u"] * 4 + ["v"] * 4 and len(CENSUS) == 12


@pytest.mark.parametrize("name", sorted(CENSUS))
def test_fix_monotonicity(name):
    category = {"m": "T1-media", "u": "T2-ui", "v": "T3-voice"}[name[0]]
    fixed = {x for x in brief(run_all(text_model("fixed_app"))) if x[0] == category}
    broken = {x for x in brief(run_all(text_model(name, CORPUS))) if x[0] == category}
    assert fixed < broken


def test_listing_pair_monotonicity():
    fixed = set(brief(run_all(text_model("fixed_app"))))
    broken = set(brief(run_all(text_model("broken_app"))))
    assert fixed < broken


# --- invariants over every fixture ----------------------------------------------

@pytest.mark.parametrize("path,frontend", list(all_models()))
def test_finding_invariants(path, frontend):
    catalog = load_catalog()
    findings = run_all(load(path, frontend))
    ids = {r.id for r in catalog.rules}
    for f in findings:
        assert f.rule_id in ids
        rule = catalog.rule(f.rule_id)
        assert (f.category, f.severity) == (rule.category, rule.severity)
        assert f.evidence, f
        assert f.message
    assert findings == sorted(findings, key=Finding.sort_key)
    assert [(f.category, f.component, f.rule_id) for f in findings] == sorted(
        (f.category, f.component, f.rule_id) for f in findings)


@pytest.mark.parametrize("path", [p for p in ALL_YAML if p.with_suffix(".apk").exists()], ids=lambda p: p.stem)
def test_frontends_agree(path):
    t, b = both_models(path.stem, path.parent)
    assert brief(run_all(t)) == brief(run_all(b))


@pytest.mark.parametrize("path", ALL_YAML, ids=lambda p: p.stem)
def test_checker_independence(path):
    model = text_model(path.stem, path.parent)
    disc = check_discoverability(model)
    notes = [f for f in disc if f.category == "info"]
    assert run_all(model, CheckerConfig(checkers=frozenset({"disc"}))) == disc
    g = graph(model)
    for key, fn in (("ui", check_ui), ("media", check_media), ("voice", check_voice)):
        cfg = CheckerConfig(checkers=frozenset({key}))
        expected = sort_findings(notes + (fn(g, model, cfg) if analyze(model).ccfg is not None else []))
        assert run_all(model, cfg) == expected


def test_disc_is_selectable():
    model = text_model("listing1_no_meta")
    assert "DISC-missing-automotive-metadata" in rules(run_all(model))
    assert "DISC-missing-automotive-metadata" not in rules(run_all(model, CheckerConfig(
        checkers=frozenset({"ui", "media", "voice"}))))
    plain = text_model("non_auto")
    assert rules(run_all(plain, CheckerConfig(checkers=frozenset({"ui"})))) == ["INFO-not-auto-app"]


def test_unknown_checker_rejected():
    with pytest.raises(ValueError):
        run_all(text_model("fixed_app"), CheckerConfig(checkers=frozenset({"ui", "lint"})))


@settings(max_examples=25, deadline=None)
@given(st.sampled_from(sorted(CENSUS) + ["broken_app", "two_services"]), st.integers(0, 2**32 - 1))
def test_determinism_under_class_order(name, seed):
    group = CORPUS if name in CENSUS else APPS
    model = text_model(name, group)
    classes = list(model.classes)
    random.Random(seed).shuffle(classes)
    shuffled = dataclasses.replace(model, classes=tuple(classes))
    assert run_all(shuffled) == run_all(model) == run_all(model)
