"""Text fixture frontend.

A fixture is a YAML document describing the checker-visible facts of an
app: the manifest declarations and, per class, its superclass and methods
with a simplified instruction list::

    package: com.example.music
    meta_data:
      - {name: com.google.android.gms.car.application, resource: "@xml/automotive_app_desc"}
    services:
      - name: .MusicService
        actions: [android.media.browse.MediaBrowserService]
    activities:
      - name: .MainActivity
        actions: [android.media.action.MEDIA_PLAY_FROM_SEARCH]
    classes:
      - name: com.example.music.MusicService
        super: androidx.media.MediaBrowserServiceCompat
        methods:
          - name: onLoadChildren
            descriptor: (Ljava/lang/String;Landroidx/media/MediaBrowserServiceCompat$Result;)V
            insns:
              - branch HAVE EMPTY
              - label HAVE
              - call androidx.media.MediaBrowserServiceCompat$Result->sendResult(Ljava/lang/Object;)V
              - return
              - label EMPTY
              - return

Instructions are one of::

    call <owner>-><name><descriptor>
    return
    return-null
    branch <label> [<label> ...]
    label <label>

``call`` falls through to the next instruction; ``return``, ``return-null``
and ``branch`` end a block, so every body must end with one of them. A
method without an ``insns`` key has no code (abstract or native).
``return-null`` returns a null constant.
"""

from __future__ import annotations

import os
import re
from typing import Any

import jsonschema
import yaml

from .axml import ComponentDecl, ManifestModel, resolve_class_name
from .dex.model import (
    BRANCH, INVOKE, RETURN, ACC_ABSTRACT, ACC_STATIC, CodeItem, DecodedInsn, DexClass, DexMethod, MethodRef,
)
from .errors import SchemaViolation
from .model import AppModel, assemble

_NAME = {"type": "string", "minLength": 1}
_COMPONENT = {
    "type": "object",
    "required": ["name"],
    "additionalProperties": False,
    "properties": {
        "name": _NAME,
        "exported": {"type": "boolean"},
        "actions": {"type": "array", "items": _NAME, "uniqueItems": True},
    },
}
FIXTURE_SCHEMA: dict[str, Any] = {
    "type": "object",
    "required": ["package"],
    "additionalProperties": False,
    "properties": {
        "package": {"type": "string", "pattern": r"^[A-Za-z_][\w]*(\.[A-Za-z_][\w]*)*$"},
        "meta_data": {
            "type": "array",
            "items": {
                "type": "object",
                "required": ["name"],
                "additionalProperties": False,
                "properties": {"name": _NAME, "value": {"type": "string"}, "resource": {"type": "string"}},
            },
        },
        "services": {"type": "array", "items": _COMPONENT},
        "activities": {"type": "array", "items": _COMPONENT},
        "classes": {
            "type": "array",
            "items": {
                "type": "object",
                "required": ["name"],
                "additionalProperties": False,
                "properties": {
                    "name": _NAME,
                    "super": {"type": ["string", "null"]},
                    "interfaces": {"type": "array", "items": _NAME},
                    "methods": {
                        "type": "array",
                        "items": {
                            "type": "object",
                            "required": ["name", "descriptor"],
                            "additionalProperties": False,
                            "properties": {
                                "name": _NAME,
                                "descriptor": {"type": "string", "pattern": r"^\(.*\)\S+$"},
                                "static": {"type": "boolean"},
                                "insns": {"type": "array", "items": {"type": "string"}},
                            },
                        },
                    },
                },
            },
        },
    },
}

_CALL = re.compile(r"^call\s+([\w.$/]+)->([\w<>$]+)(\([^)\s]*\)\S+)$")
_LABEL = re.compile(r"^[A-Za-z_][\w.]*$")


def _path(parts) -> str:
    out = ""
    for p in parts:
        out += f"[{p}]" if isinstance(p, int) else (f".{p}" if out else str(p))
    return out or "<root>"


def _lower(insns: list[str], descriptor: str, where: str) -> CodeItem:
    labels: dict[str, int] = {}
    pending: list[tuple[str, str, list[str]]] = []
    out: list[DecodedInsn] = []
    offset = 0
    for i, raw in enumerate(insns):
        loc = f"{where}.insns[{i}]"
        text = " ".join(raw.split())
        op, _, rest = text.partition(" ")
        if op == "label":
            if not _LABEL.match(rest):
                raise SchemaViolation(loc, f"bad label {rest!r}")
            if rest in labels:
                raise SchemaViolation(loc, f"label {rest!r} defined twice")
            labels[rest] = offset
        elif op == "call":
            m = _CALL.match(text)
            if not m:
                raise SchemaViolation(loc, f"malformed call {raw!r}; expected 'call Owner->name(args)ret'")
            ref = MethodRef(m.group(1).replace("/", "."), m.group(2), m.group(3))
            out.append(DecodedInsn(offset, INVOKE, 1, target=ref,
                                   flavor="direct" if ref.name == "<init>" else "virtual"))
            offset += 1
        elif text == "return":
            out.append(DecodedInsn(offset, RETURN, 1, falls_through=False))
            offset += 1
        elif text == "return-null":
            if descriptor.endswith(")V"):
                raise SchemaViolation(loc, "return-null in a method returning void")
            out.append(DecodedInsn(offset, RETURN, 1, register=0, falls_through=False, null_literal=True))
            offset += 1
        elif op == "branch":
            targets = rest.split()
            if not targets:
                raise SchemaViolation(loc, "branch needs at least one label")
            pending.append((loc, str(len(out)), targets))
            out.append(DecodedInsn(offset, BRANCH, 1, falls_through=False))
            offset += 1
        else:
            raise SchemaViolation(loc, f"unknown instruction {raw!r}")

    if not out:
        raise SchemaViolation(f"{where}.insns", "empty body; end the method with 'return'")
    if out[-1].falls_through:
        raise SchemaViolation(f"{where}.insns", "body falls off the end; last instruction must be return or branch")
    for loc, idx, targets in pending:
        resolved = []
        for t in targets:
            if t not in labels:
                raise SchemaViolation(loc, f"undefined label {t!r}")
            if labels[t] >= offset:
                raise SchemaViolation(loc, f"label {t!r} does not precede an instruction")
            resolved.append(labels[t])
        i = int(idx)
        out[i] = DecodedInsn(out[i].offset, BRANCH, 1, targets=tuple(dict.fromkeys(resolved)), falls_through=False)
    return CodeItem(registers=1, instructions=tuple(out), insns_size=offset)


def _components(doc: dict, key: str, package: str, kind: str) -> tuple[ComponentDecl, ...]:
    out = []
    for c in doc.get(key) or []:
        actions = frozenset(c.get("actions") or [])
        exported = c.get("exported", bool(actions))
        out.append(ComponentDecl(resolve_class_name(package, c["name"]), actions, exported, kind))
    return tuple(out)


def model_from_document(doc: Any, fixture_id: str = "<text>") -> AppModel:
    validator = jsonschema.Draft7Validator(FIXTURE_SCHEMA)
    errors = sorted(validator.iter_errors(doc), key=lambda e: list(map(str, e.absolute_path)))
    if errors:
        err = errors[0]
        raise SchemaViolation(_path(err.absolute_path), err.message)

    package = doc["package"]
    meta = tuple((m["name"], m.get("value", m.get("resource", ""))) for m in doc.get("meta_data") or [])
    manifest = ManifestModel(package, meta,
                             _components(doc, "services", package, "service"),
                             _components(doc, "activities", package, "activity"))

    classes = []
    seen = set()
    for ci, c in enumerate(doc.get("classes") or []):
        if c["name"] in seen:
            raise SchemaViolation(f"classes[{ci}].name", f"duplicate class {c['name']}")
        seen.add(c["name"])
        methods = []
        keys = set()
        for mi, m in enumerate(c.get("methods") or []):
            where = f"classes[{ci}].methods[{mi}]"
            key = (m["name"], m["descriptor"])
            if key in keys:
                raise SchemaViolation(where, f"duplicate method {m['name']}{m['descriptor']}")
            keys.add(key)
            if "insns" in m:
                code, access = _lower(m["insns"], m["descriptor"], where), 0
            else:
                code, access = None, ACC_ABSTRACT
            if m.get("static"):
                access |= ACC_STATIC
            methods.append(DexMethod(c["name"], m["name"], m["descriptor"], code, access))
        sup = c["super"] if "super" in c else "java.lang.Object"
        classes.append(DexClass(c["name"], sup, tuple(c.get("interfaces") or []), tuple(methods)))
    return assemble(manifest, classes, fixture_id)


def load_text_fixture(fixture_text: str, fixture_id: str = "<text>") -> AppModel:
    try:
        doc = yaml.safe_load(fixture_text)
    except yaml.YAMLError as exc:
        raise SchemaViolation("<root>", f"not a YAML document: {exc}") from exc
    return model_from_document(doc, fixture_id)


def load_fixture_file(path: str | os.PathLike) -> AppModel:
    with open(path, encoding="utf-8") as fh:
        return load_text_fixture(fh.read(), str(path))
