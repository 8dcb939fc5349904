from __future__ import annotations

import logging
from typing import Iterable, Optional

from ..errors import CyclicHierarchy
from .model import DexClass, DexMethod

log = logging.getLogger(__name__)


def merge_multidex(per_dex: Iterable[Iterable[DexClass]], warnings: Optional[list[str]] = None) -> list[DexClass]:
    """Concatenate per-file class lists; the first definition of a name wins."""
    seen: dict[str, int] = {}
    merged: list[DexClass] = []
    for file_no, classes in enumerate(per_dex):
        for cls in classes:
            if cls.name in seen:
                msg = f"duplicate class {cls.name} in dex #{file_no + 1}; keeping the definition from dex #{seen[cls.name] + 1}"
                log.warning(msg)
                if warnings is not None:
                    warnings.append(msg)
                continue
            seen[cls.name] = file_no
            merged.append(cls)
    return merged


def name_matches(name: Optional[str], suffix: str) -> bool:
    """Suffix match on a ``.`` or ``$`` boundary."""
    if not name:
        return False
    return name == suffix or name.endswith("." + suffix) or name.endswith("$" + suffix)


def superclass_chain(cls: DexClass, by_name: dict[str, DexClass]) -> list[str]:
    """Superclass names from ``cls`` upward until the chain leaves the app."""
    chain: list[str] = []
    visited = {cls.name}
    cur = cls
    while cur.superclass is not None:
        sup = cur.superclass
        if sup in visited:
            raise CyclicHierarchy(f"superclass chain of {cls.name} revisits {sup}")
        chain.append(sup)
        visited.add(sup)
        nxt = by_name.get(sup)
        if nxt is None:
            break
        cur = nxt
    return chain


def subclasses_of(classes: list[DexClass], base_name_suffixes: set[str] | frozenset[str]) -> list[DexClass]:
    by_name = {c.name: c for c in classes}
    out = []
    for cls in classes:
        if any(name_matches(sup, s) for sup in superclass_chain(cls, by_name) for s in base_name_suffixes):
            out.append(cls)
    return out


def lookup_method(by_name: dict[str, DexClass], owner: str, name: str,
                  descriptor: Optional[str] = None) -> Optional[DexMethod]:
    """Find a method in ``owner`` or its app-local superclasses (no subtype dispatch)."""
    cur = by_name.get(owner)
    visited = set()
    while cur is not None and cur.name not in visited:
        visited.add(cur.name)
        found = cur.find(name, descriptor)
        if found:
            return found[0]
        cur = by_name.get(cur.superclass) if cur.superclass else None
    return None
