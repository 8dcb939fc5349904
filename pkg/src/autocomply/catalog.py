"""Loader for the checked-in callback and rule catalog (``data/rules.json``)."""

from __future__ import annotations

import json
import re
from dataclasses import dataclass
from functools import lru_cache
from importlib import resources

CATEGORIES = ("media", "ui", "voice")
SEVERITIES = ("violation", "warning", "info")
FINDING_CATEGORIES = ("T1-media", "T2-ui", "T3-voice", "discoverability", "info")
HOST_SOURCES = ("UI-request", "host-event", "assistant")


@dataclass(frozen=True)
class CallbackSpec:
    category: str
    owner_kind: str
    name: str
    descriptor: str
    obligation: str
    targets: tuple[str, ...] = ()
    deferring_targets: tuple[str, ...] = ()

    def matches(self, descriptor: str) -> bool:
        return re.match(self.descriptor, descriptor) is not None


@dataclass(frozen=True)
class Rule:
    id: str
    category: str
    severity: str
    name: str
    description: str


@dataclass(frozen=True)
class Catalog:
    callbacks: tuple[CallbackSpec, ...]
    rules: tuple[Rule, ...]
    component_bases: dict[str, tuple[str, ...]]
    host_sources: dict[str, str]
    session_registration: str
    playback_api: str

    def rule(self, rule_id: str) -> Rule:
        for r in self.rules:
            if r.id == rule_id:
                return r
        raise KeyError(f"rule {rule_id!r} is not in the catalog")

    def specs(self, category: str | None = None) -> tuple[CallbackSpec, ...]:
        return tuple(s for s in self.callbacks if category is None or s.category == category)

    def spec(self, name: str) -> CallbackSpec:
        for s in self.callbacks:
            if s.name == name:
                return s
        raise KeyError(name)

    def is_playback_api(self, method_name: str) -> bool:
        return re.match(self.playback_api, method_name) is not None


def parse_catalog(doc: dict) -> Catalog:
    callbacks = tuple(
        CallbackSpec(c["category"], c["owner_kind"], c["name"], c["descriptor"], c["obligation"],
                     tuple(c.get("targets", ())), tuple(c.get("deferring_targets", ())))
        for c in doc["callbacks"])
    names = [c.name for c in callbacks]
    if len(names) != len(set(names)):
        raise ValueError("a callback name appears in more than one catalog entry")
    rules = tuple(Rule(**r) for r in doc["rules"])
    for r in rules:
        if r.severity not in SEVERITIES or r.category not in FINDING_CATEGORIES:
            raise ValueError(f"rule {r.id} has an unknown severity or category")
    return Catalog(
        callbacks=callbacks,
        rules=rules,
        component_bases={k: tuple(v) for k, v in doc["component_bases"].items()},
        host_sources=dict(doc["host_sources"]),
        session_registration=doc["session_registration"],
        playback_api=doc["playback_api"],
    )


@lru_cache(maxsize=None)
def load_catalog() -> Catalog:
    text = resources.files("autocomply").joinpath("data/rules.json").read_text(encoding="utf-8")
    return parse_catalog(json.loads(text))
