"""Minimal read-only ZIP reader for APK files.

Only what the analyzer needs: the end-of-central-directory record, the
central directory, local headers, and STORED/DEFLATE payloads. ZIP64 and
encryption are rejected.
"""

from __future__ import annotations

import os
import re
import struct
import zlib
from dataclasses import dataclass, field
from typing import Optional

from .errors import CorruptEntry, MissingManifest, NotAZipArchive

LOCAL_SIG = 0x04034B50
CENTRAL_SIG = 0x02014B50
EOCD_SIG = 0x06054B50

EOCD_STRUCT = struct.Struct("<IHHHHIIH")
CENTRAL_STRUCT = struct.Struct("<IHHHHHHIIIHHHHHII")
LOCAL_STRUCT = struct.Struct("<IHHHHHIIIHH")

STORED = 0
DEFLATED = 8

MANIFEST_NAME = "AndroidManifest.xml"
_DEX_NAME = re.compile(r"^classes(\d*)\.dex$")
_MAX_SIZE = 0xFFFFFFFF


@dataclass(frozen=True)
class ApkEntry:
    """One central-directory record. ``data`` is decompressed on access."""

    path: str
    size: int
    compressed_size: int
    method: int
    crc32: int
    header_offset: int
    _archive: bytes = field(repr=False, compare=False, default=b"")

    @property
    def data(self) -> bytes:
        return _read_entry(self._archive, self)


@dataclass(frozen=True)
class ApkContents:
    manifest_bytes: bytes
    dex_entries: tuple[bytes, ...]
    entry_index: tuple[ApkEntry, ...]
    dex_names: tuple[str, ...] = ()

    def entry(self, path: str) -> Optional[ApkEntry]:
        for e in self.entry_index:
            if e.path == path:
                return e
        return None


def _find_eocd(buf: bytes) -> int:
    # The comment is at most 0xFFFF bytes, so the record sits in the tail.
    start = max(0, len(buf) - (EOCD_STRUCT.size + 0xFFFF))
    pos = buf.rfind(b"PK\x05\x06", start)
    while pos >= 0:
        if pos + EOCD_STRUCT.size <= len(buf):
            comment_len = struct.unpack_from("<H", buf, pos + 20)[0]
            if pos + EOCD_STRUCT.size + comment_len == len(buf):
                return pos
        pos = buf.rfind(b"PK\x05\x06", start, pos)
    raise NotAZipArchive("end of central directory record not found")


def parse_central_directory(buf: bytes) -> list[ApkEntry]:
    """Return entries in central-directory order, duplicates included."""
    if len(buf) > _MAX_SIZE:
        raise NotAZipArchive("archives larger than 4 GiB (ZIP64) are not supported")
    if len(buf) < EOCD_STRUCT.size or buf[:4] not in (b"PK\x03\x04", b"PK\x05\x06"):
        raise NotAZipArchive("missing ZIP signature")
    eocd = _find_eocd(buf)
    (_, disk, cd_disk, n_disk, n_total, cd_size, cd_offset, _) = EOCD_STRUCT.unpack_from(buf, eocd)
    if n_total == 0xFFFF or cd_size == 0xFFFFFFFF or cd_offset == 0xFFFFFFFF:
        raise NotAZipArchive("ZIP64 archives are not supported")
    if disk != 0 or cd_disk != 0 or n_disk != n_total:
        raise NotAZipArchive("multi-disk archives are not supported")
    if cd_offset + cd_size > eocd:
        raise NotAZipArchive("central directory extends past its end record")

    entries = []
    pos = cd_offset
    for _ in range(n_total):
        if pos + CENTRAL_STRUCT.size > eocd:
            raise NotAZipArchive("truncated central directory")
        rec = CENTRAL_STRUCT.unpack_from(buf, pos)
        if rec[0] != CENTRAL_SIG:
            raise NotAZipArchive(f"bad central directory signature at {pos:#x}")
        flags, method = rec[3], rec[4]
        crc, csize, usize = rec[7], rec[8], rec[9]
        name_len, extra_len, comment_len = rec[10], rec[11], rec[12]
        local_off = rec[16]
        raw_name = buf[pos + CENTRAL_STRUCT.size: pos + CENTRAL_STRUCT.size + name_len]
        name = raw_name.decode("utf-8" if flags & 0x800 else "cp437")
        if csize == 0xFFFFFFFF or usize == 0xFFFFFFFF or local_off == 0xFFFFFFFF:
            raise NotAZipArchive(f"{name}: ZIP64 entries are not supported")
        entries.append(ApkEntry(
            path=name.replace("\\", "/"),
            size=usize,
            compressed_size=csize,
            method=method | (0x10000 if flags & 0x1 else 0),
            crc32=crc,
            header_offset=local_off,
            _archive=buf,
        ))
        pos += CENTRAL_STRUCT.size + name_len + extra_len + comment_len
    return entries


def _read_entry(buf: bytes, entry: ApkEntry) -> bytes:
    if entry.method & 0x10000:
        raise CorruptEntry(f"{entry.path}: encrypted entries are not supported")
    off = entry.header_offset
    if off + LOCAL_STRUCT.size > len(buf):
        raise CorruptEntry(f"{entry.path}: local header out of range")
    loc = LOCAL_STRUCT.unpack_from(buf, off)
    if loc[0] != LOCAL_SIG:
        raise CorruptEntry(f"{entry.path}: bad local header signature")
    start = off + LOCAL_STRUCT.size + loc[9] + loc[10]
    raw = buf[start:start + entry.compressed_size]
    if len(raw) != entry.compressed_size:
        raise CorruptEntry(f"{entry.path}: payload truncated")

    if entry.method == STORED:
        data = raw
    elif entry.method == DEFLATED:
        try:
            d = zlib.decompressobj(-15)
            data = d.decompress(raw) + d.flush()
        except zlib.error as exc:
            raise CorruptEntry(f"{entry.path}: {exc}") from exc
    else:
        raise CorruptEntry(f"{entry.path}: unsupported compression method {entry.method}")

    if len(data) != entry.size:
        raise CorruptEntry(f"{entry.path}: size mismatch ({len(data)} != {entry.size})")
    if zlib.crc32(data) != entry.crc32:
        raise CorruptEntry(f"{entry.path}: CRC mismatch")
    return data


def dex_sort_key(name: str) -> int:
    m = _DEX_NAME.match(name)
    if not m:
        raise ValueError(name)
    return int(m.group(1) or 1)


def open_apk_bytes(buf: bytes) -> ApkContents:
    entries = parse_central_directory(buf)
    # Android resolves duplicate names to the last central directory record.
    latest: dict[str, ApkEntry] = {}
    for e in entries:
        latest[e.path] = e
    index = tuple(latest.values())

    manifest = latest.get(MANIFEST_NAME)
    if manifest is None:
        raise MissingManifest(f"no {MANIFEST_NAME} entry")
    dex_names = sorted((n for n in latest if _DEX_NAME.match(n)), key=dex_sort_key)
    return ApkContents(
        manifest_bytes=manifest.data,
        dex_entries=tuple(latest[n].data for n in dex_names),
        entry_index=index,
        dex_names=tuple(dex_names),
    )


def open_apk(path: str | os.PathLike) -> ApkContents:
    with open(path, "rb") as fh:
        buf = fh.read()
    return open_apk_bytes(buf)
