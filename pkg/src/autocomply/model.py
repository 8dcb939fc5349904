"""Unified per-app analysis input built from an APK or a text fixture."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from functools import cached_property
from typing import Optional

from .apk import ApkContents
from .axml import ManifestModel, decode_manifest
from .dex import DexClass, DexMethod, lookup_method, merge_multidex, parse_dex

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class AppModel:
    manifest: ManifestModel
    classes: tuple[DexClass, ...]
    origin: str
    unresolved_services: tuple[str, ...] = ()
    warnings: tuple[str, ...] = field(default=(), compare=False)

    @cached_property
    def by_name(self) -> dict[str, DexClass]:
        return {c.name: c for c in self.classes}

    def resolve(self, owner: str, name: str, descriptor: Optional[str] = None) -> Optional[DexMethod]:
        return lookup_method(self.by_name, owner, name, descriptor)

    def is_app_class(self, name: str) -> bool:
        return name in self.by_name


def unresolved(manifest: ManifestModel, classes: tuple[DexClass, ...]) -> tuple[str, ...]:
    names = {c.name for c in classes}
    return tuple(s.class_name for s in manifest.services if s.class_name not in names)


def assemble(manifest: ManifestModel, classes: list[DexClass], origin: str,
             warnings: Optional[list[str]] = None) -> AppModel:
    classes_t = tuple(classes)
    missing = unresolved(manifest, classes_t)
    notes = list(warnings or [])
    for name in missing:
        msg = f"service {name} declared in the manifest has no class in the app code"
        log.warning(msg)
        notes.append(msg)
    return AppModel(manifest, classes_t, origin, missing, tuple(notes))


def build_from_apk(contents: ApkContents, origin: str = "<apk>") -> AppModel:
    manifest = decode_manifest(contents.manifest_bytes)
    warnings: list[str] = []
    classes = merge_multidex((parse_dex(d) for d in contents.dex_entries), warnings)
    return assemble(manifest, classes, origin, warnings)
