"""Decoder for Android binary XML (AXML) manifests.

The decoder walks the chunk stream inside the outer RES_XML_TYPE chunk and
rebuilds an :class:`xml.etree.ElementTree.Element` tree with namespace
prefixes dropped. :func:`decode_manifest` then extracts the parts of the
manifest the checkers care about.
"""

from __future__ import annotations

import struct
import xml.etree.ElementTree as ET
from dataclasses import dataclass

from .errors import NotAxml, StringPoolCorrupt, TruncatedChunk

RES_STRING_POOL_TYPE = 0x0001
RES_XML_TYPE = 0x0003
RES_XML_START_NAMESPACE_TYPE = 0x0100
RES_XML_END_NAMESPACE_TYPE = 0x0101
RES_XML_START_ELEMENT_TYPE = 0x0102
RES_XML_END_ELEMENT_TYPE = 0x0103
RES_XML_CDATA_TYPE = 0x0104
RES_XML_RESOURCE_MAP_TYPE = 0x0180

UTF8_FLAG = 1 << 8
NO_ENTRY = 0xFFFFFFFF

TYPE_NULL = 0x00
TYPE_REFERENCE = 0x01
TYPE_ATTRIBUTE = 0x02
TYPE_STRING = 0x03
TYPE_FLOAT = 0x04
TYPE_DIMENSION = 0x05
TYPE_FRACTION = 0x06
TYPE_INT_DEC = 0x10
TYPE_INT_HEX = 0x11
TYPE_INT_BOOLEAN = 0x12
TYPE_FIRST_COLOR_INT = 0x1C
TYPE_LAST_COLOR_INT = 0x1F

# android:* attribute resource ids, used when an obfuscator blanked the name string.
_ANDROID_ATTR_NAMES = {
    0x01010003: "name",
    0x01010010: "exported",
    0x01010024: "value",
    0x01010025: "resource",
}

CAR_APPLICATION_META = "com.google.android.gms.car.application"
MEDIA_BROWSER_ACTION = "android.media.browse.MediaBrowserService"
PLAY_FROM_SEARCH_ACTION = "android.media.action.MEDIA_PLAY_FROM_SEARCH"

_CHUNK = struct.Struct("<HHI")


def _chunk_header(buf: bytes, pos: int, limit: int) -> tuple[int, int, int]:
    if pos + _CHUNK.size > limit:
        raise TruncatedChunk(f"chunk header at {pos:#x} runs past {limit:#x}")
    ctype, hsize, size = _CHUNK.unpack_from(buf, pos)
    if size < _CHUNK.size or hsize < _CHUNK.size or hsize > size or pos + size > limit:
        raise TruncatedChunk(f"chunk {ctype:#06x} at {pos:#x} declares size {size} beyond {limit:#x}")
    return ctype, hsize, size


def _uleb_len8(buf: bytes, pos: int) -> tuple[int, int]:
    n = buf[pos]
    if n & 0x80:
        return ((n & 0x7F) << 8) | buf[pos + 1], pos + 2
    return n, pos + 1


def _uleb_len16(buf: bytes, pos: int) -> tuple[int, int]:
    n = struct.unpack_from("<H", buf, pos)[0]
    if n & 0x8000:
        return ((n & 0x7FFF) << 16) | struct.unpack_from("<H", buf, pos + 2)[0], pos + 4
    return n, pos + 2


def parse_string_pool(buf: bytes, pos: int, hsize: int, size: int) -> list[str]:
    end = pos + size
    if hsize < 28:
        raise StringPoolCorrupt("string pool header too small")
    count, _styles, flags, strings_start, _styles_start = struct.unpack_from("<IIIII", buf, pos + 8)
    if pos + hsize + 4 * count > end:
        raise StringPoolCorrupt("string offset table exceeds pool chunk")
    offsets = struct.unpack_from(f"<{count}I", buf, pos + hsize)
    base = pos + strings_start
    utf8 = bool(flags & UTF8_FLAG)
    out = []
    for i, off in enumerate(offsets):
        p = base + off
        try:
            if p >= end:
                raise IndexError
            if utf8:
                _chars, p = _uleb_len8(buf, p)
                nbytes, p = _uleb_len8(buf, p)
                if p + nbytes > end:
                    raise IndexError
                out.append(buf[p:p + nbytes].decode("utf-8"))
            else:
                nchars, p = _uleb_len16(buf, p)
                if p + 2 * nchars > end:
                    raise IndexError
                out.append(buf[p:p + 2 * nchars].decode("utf-16-le"))
        except (IndexError, struct.error, UnicodeDecodeError) as exc:
            raise StringPoolCorrupt(f"string #{i} at offset {off:#x} is malformed") from exc
    return out


def _format_value(dtype: int, data: int, raw: str | None, strings: list[str]) -> str:
    if dtype == TYPE_STRING:
        return _string(strings, data)
    if raw is not None:
        return raw
    if dtype == TYPE_REFERENCE:
        return f"@0x{data:08x}"
    if dtype == TYPE_ATTRIBUTE:
        return f"?0x{data:08x}"
    if dtype == TYPE_INT_BOOLEAN:
        return "true" if data else "false"
    if dtype == TYPE_INT_DEC:
        return str(struct.unpack("<i", struct.pack("<I", data))[0])
    if dtype == TYPE_INT_HEX:
        return f"0x{data:08x}"
    if dtype == TYPE_FLOAT:
        return repr(struct.unpack("<f", struct.pack("<I", data))[0])
    if TYPE_FIRST_COLOR_INT <= dtype <= TYPE_LAST_COLOR_INT:
        return f"#{data:08x}"
    if dtype == TYPE_NULL:
        return ""
    return f"0x{data:08x}"


def _string(strings: list[str], idx: int) -> str:
    if idx >= len(strings):
        raise StringPoolCorrupt(f"string index {idx} out of range (pool has {len(strings)})")
    return strings[idx]


def parse_axml(buf: bytes) -> ET.Element:
    """Decode a binary XML document into an element tree (local names only)."""
    if len(buf) < _CHUNK.size:
        raise NotAxml("too short for an XML chunk header")
    ctype, hsize, size = _CHUNK.unpack_from(buf, 0)
    if ctype != RES_XML_TYPE:
        raise NotAxml(f"expected chunk type 0x0003, found {ctype:#06x}")
    if size > len(buf):
        raise TruncatedChunk(f"document declares {size} bytes, only {len(buf)} present")
    limit = size

    strings: list[str] = []
    res_ids: list[int] = []
    root: ET.Element | None = None
    stack: list[ET.Element] = []
    pos = hsize
    while pos < limit:
        ctype, hsize, csize = _chunk_header(buf, pos, limit)
        if ctype == RES_STRING_POOL_TYPE:
            strings = parse_string_pool(buf, pos, hsize, csize)
        elif ctype == RES_XML_RESOURCE_MAP_TYPE:
            n = (csize - hsize) // 4
            res_ids = list(struct.unpack_from(f"<{n}I", buf, pos + hsize))
        elif ctype == RES_XML_START_ELEMENT_TYPE:
            elem = _start_element(buf, pos, hsize, csize, strings, res_ids)
            if stack:
                stack[-1].append(elem)
            elif root is None:
                root = elem
            else:
                raise NotAxml("more than one root element")
            stack.append(elem)
        elif ctype == RES_XML_END_ELEMENT_TYPE:
            if not stack:
                raise NotAxml(f"unbalanced end element at {pos:#x}")
            stack.pop()
        # namespaces, CDATA and unknown chunks carry nothing we need
        pos += csize
    if root is None:
        raise NotAxml("document has no root element")
    return root


def _start_element(buf, pos, hsize, csize, strings, res_ids) -> ET.Element:
    body = pos + hsize
    if body + 20 > pos + csize:
        raise TruncatedChunk(f"start element at {pos:#x} too short")
    _ns, name_idx, attr_start, attr_size, attr_count = struct.unpack_from("<IIHHH", buf, body)
    elem = ET.Element(_string(strings, name_idx))
    apos = body + attr_start
    for i in range(attr_count):
        a = apos + i * attr_size
        if a + 20 > pos + csize:
            raise TruncatedChunk(f"attribute {i} of <{elem.tag}> runs past its chunk")
        _ans, aname, raw_idx, _tsize, _res0, dtype, data = struct.unpack_from("<IIIHBBI", buf, a)
        name = _string(strings, aname)
        if not name and aname < len(res_ids):
            name = _ANDROID_ATTR_NAMES.get(res_ids[aname], f"0x{res_ids[aname]:08x}")
        raw = _string(strings, raw_idx) if raw_idx != NO_ENTRY else None
        elem.set(name, _format_value(dtype, data, raw, strings))
    return elem


@dataclass(frozen=True)
class ComponentDecl:
    class_name: str
    intent_actions: frozenset[str]
    exported: bool
    kind: str = "service"


# Services are the declared type name; activities share the same shape.
ServiceDecl = ComponentDecl


@dataclass(frozen=True)
class ManifestModel:
    package_name: str
    meta_data: tuple[tuple[str, str], ...]
    services: tuple[ComponentDecl, ...]
    activities: tuple[ComponentDecl, ...] = ()

    @property
    def uses_auto_descriptor(self) -> bool:
        return any(name == CAR_APPLICATION_META for name, _ in self.meta_data)

    def components(self) -> tuple[ComponentDecl, ...]:
        return self.services + self.activities


@dataclass(frozen=True)
class AutoComponentRef:
    service: ComponentDecl
    has_auto_descriptor: bool

    @property
    def class_name(self) -> str:
        return self.service.class_name


def resolve_class_name(package: str, name: str) -> str:
    if name.startswith("."):
        return package + name
    if "." not in name:
        return f"{package}.{name}"
    return name


def _component(elem: ET.Element, package: str, kind: str) -> ComponentDecl:
    actions = []
    for flt in elem.iter("intent-filter"):
        for act in flt.iter("action"):
            value = act.get("name")
            if value and value not in actions:
                actions.append(value)
    exported = elem.get("exported")
    return ComponentDecl(
        class_name=resolve_class_name(package, elem.get("name", "")),
        intent_actions=frozenset(actions),
        # pre-S default: exported iff the component has intent filters
        exported=(exported == "true") if exported is not None else bool(actions),
        kind=kind,
    )


def manifest_from_tree(root: ET.Element) -> ManifestModel:
    if root.tag != "manifest":
        raise NotAxml(f"root element is <{root.tag}>, expected <manifest>")
    package = root.get("package", "")
    if not package:
        raise NotAxml("manifest has no package attribute")
    meta = []
    for m in root.iter("meta-data"):
        meta.append((m.get("name", ""), m.get("value", m.get("resource", ""))))
    services, activities = [], []
    for app in root.findall("application"):
        for child in app:
            if child.tag == "service":
                services.append(_component(child, package, "service"))
            elif child.tag in ("activity", "activity-alias"):
                activities.append(_component(child, package, "activity"))
    return ManifestModel(package, tuple(meta), tuple(services), tuple(activities))


def decode_manifest(manifest_bytes: bytes) -> ManifestModel:
    return manifest_from_tree(parse_axml(manifest_bytes))


def auto_components(model: ManifestModel) -> list[AutoComponentRef]:
    """Services that expose the media browser action."""
    flag = model.uses_auto_descriptor
    return [AutoComponentRef(s, flag) for s in model.services if MEDIA_BROWSER_ACTION in s.intent_actions]


def declares_play_from_search(model: ManifestModel) -> bool:
    return any(PLAY_FROM_SEARCH_ACTION in c.intent_actions for c in model.components())
