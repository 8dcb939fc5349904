"""DEX file parser.

Decodes the id tables, class definitions and code items. Instruction
decoding is selective: calls, returns, null constants, branches, throws and
register moves are decoded; everything else is kept as an opaque
instruction of known width.
"""

from __future__ import annotations

import re
import struct
from typing import Optional

from ..errors import BadIndex, BadMagic, TruncatedSection
from . import opcodes
from .model import (
    BRANCH, CONST_NULL, INVOKE, MOVE_RESULT, OTHER, RETURN, THROW,
    CodeItem, DecodedInsn, DexClass, DexMethod, MethodRef, TryBlock, type_to_name,
)

NO_INDEX = 0xFFFFFFFF
HEADER_SIZE = 0x70
_MAGIC = re.compile(rb"^dex\n(\d\d\d)\x00$")

_INVOKE_FLAVORS = {0: "virtual", 1: "super", 2: "direct", 3: "static", 4: "interface"}


def read_uleb128(buf: bytes, pos: int) -> tuple[int, int]:
    result = shift = 0
    while True:
        if pos >= len(buf):
            raise TruncatedSection("ULEB128 value runs past end of file")
        b = buf[pos]
        pos += 1
        result |= (b & 0x7F) << shift
        if not b & 0x80:
            return result, pos
        shift += 7
        if shift > 35:
            raise TruncatedSection("ULEB128 value longer than 5 bytes")


def read_sleb128(buf: bytes, pos: int) -> tuple[int, int]:
    result = shift = 0
    while True:
        if pos >= len(buf):
            raise TruncatedSection("SLEB128 value runs past end of file")
        b = buf[pos]
        pos += 1
        result |= (b & 0x7F) << shift
        shift += 7
        if not b & 0x80:
            if b & 0x40:
                result -= 1 << shift
            return result, pos


def decode_mutf8(raw: bytes) -> str:
    """Modified UTF-8: NUL as C0 80, supplementary chars as surrogate pairs."""
    text = raw.replace(b"\xc0\x80", b"\x00").decode("utf-8", errors="surrogatepass")
    if any(0xD800 <= ord(c) <= 0xDFFF for c in text):
        text = text.encode("utf-16-le", errors="surrogatepass").decode("utf-16-le", errors="replace")
    return text


def _s8(v: int) -> int:
    return v - 0x100 if v & 0x80 else v


def _s16(v: int) -> int:
    return v - 0x10000 if v & 0x8000 else v


def _s32(v: int) -> int:
    return v - 0x100000000 if v & 0x80000000 else v


class DexFile:
    """Id tables of one DEX file plus lazy class decoding."""

    def __init__(self, buf: bytes):
        if len(buf) < HEADER_SIZE:
            raise BadMagic("file shorter than a DEX header")
        m = _MAGIC.match(buf[:8])
        if not m or int(m.group(1)) < 35:
            raise BadMagic(f"bad DEX magic {buf[:8]!r}")
        self.buf = buf
        self.version = int(m.group(1))
        (self.file_size, header_size, endian) = struct.unpack_from("<III", buf, 0x20)
        if endian != 0x12345678:
            raise BadMagic(f"unsupported endian tag {endian:#x}")
        vals = struct.unpack_from("<17I", buf, 0x2C)
        (_link_size, _link_off, self.map_off,
         self.string_ids_size, self.string_ids_off,
         self.type_ids_size, self.type_ids_off,
         self.proto_ids_size, self.proto_ids_off,
         self.field_ids_size, self.field_ids_off,
         self.method_ids_size, self.method_ids_off,
         self.class_defs_size, self.class_defs_off, _data_size, _data_off) = vals
        self._check("string_ids", self.string_ids_off, self.string_ids_size, 4)
        self._check("type_ids", self.type_ids_off, self.type_ids_size, 4)
        self._check("proto_ids", self.proto_ids_off, self.proto_ids_size, 12)
        self._check("field_ids", self.field_ids_off, self.field_ids_size, 8)
        self._check("method_ids", self.method_ids_off, self.method_ids_size, 8)
        self._check("class_defs", self.class_defs_off, self.class_defs_size, 32)
        self._strings: dict[int, str] = {}
        self._methods: dict[int, MethodRef] = {}
        self._protos: dict[int, str] = {}

    def _check(self, section: str, off: int, count: int, item: int) -> None:
        if count and off + count * item > len(self.buf):
            raise TruncatedSection(f"{section}: {count} items at {off:#x} exceed file size {len(self.buf)}")

    def _u32(self, pos: int) -> int:
        if pos + 4 > len(self.buf):
            raise TruncatedSection(f"read at {pos:#x} past end of file")
        return struct.unpack_from("<I", self.buf, pos)[0]

    # -- id tables ---------------------------------------------------------

    def string(self, idx: int) -> str:
        if idx >= self.string_ids_size:
            raise BadIndex(f"string index {idx} >= {self.string_ids_size}")
        s = self._strings.get(idx)
        if s is None:
            off = self._u32(self.string_ids_off + 4 * idx)
            _utf16_len, pos = read_uleb128(self.buf, off)
            end = self.buf.find(b"\x00", pos)
            if end < 0:
                raise TruncatedSection(f"string #{idx} is not terminated")
            s = self._strings[idx] = decode_mutf8(self.buf[pos:end])
        return s

    def type_descriptor(self, idx: int) -> str:
        if idx >= self.type_ids_size:
            raise BadIndex(f"type index {idx} >= {self.type_ids_size}")
        return self.string(self._u32(self.type_ids_off + 4 * idx))

    def type_name(self, idx: int) -> str:
        return type_to_name(self.type_descriptor(idx))

    def type_list(self, off: int) -> list[str]:
        if off == 0:
            return []
        n = self._u32(off)
        if off + 4 + 2 * n > len(self.buf):
            raise TruncatedSection(f"type_list at {off:#x} exceeds file")
        return [self.type_descriptor(i) for i in struct.unpack_from(f"<{n}H", self.buf, off + 4)]

    def proto(self, idx: int) -> str:
        if idx >= self.proto_ids_size:
            raise BadIndex(f"proto index {idx} >= {self.proto_ids_size}")
        d = self._protos.get(idx)
        if d is None:
            _shorty, ret, params = struct.unpack_from("<III", self.buf, self.proto_ids_off + 12 * idx)
            d = self._protos[idx] = "(" + "".join(self.type_list(params)) + ")" + self.type_descriptor(ret)
        return d

    def method_ref(self, idx: int) -> MethodRef:
        if idx >= self.method_ids_size:
            raise BadIndex(f"method index {idx} >= {self.method_ids_size}")
        ref = self._methods.get(idx)
        if ref is None:
            cls, proto, name = struct.unpack_from("<HHI", self.buf, self.method_ids_off + 8 * idx)
            ref = self._methods[idx] = MethodRef(self.type_name(cls), self.string(name), self.proto(proto))
        return ref

    # -- classes -----------------------------------------------------------

    def classes(self) -> list[DexClass]:
        return [self._class_def(i) for i in range(self.class_defs_size)]

    def _class_def(self, i: int) -> DexClass:
        (cls_idx, access, super_idx, ifaces_off, _src, _annot, data_off, _static) = struct.unpack_from(
            "<8I", self.buf, self.class_defs_off + 32 * i)
        name = self.type_name(cls_idx)
        superclass = self.type_name(super_idx) if super_idx != NO_INDEX else None
        interfaces = tuple(type_to_name(t) for t in self.type_list(ifaces_off))
        methods = self._class_data(data_off) if data_off else []
        return DexClass(name, superclass, interfaces, tuple(methods), access)

    def _class_data(self, off: int) -> list[DexMethod]:
        buf = self.buf
        n_sf, pos = read_uleb128(buf, off)
        n_if, pos = read_uleb128(buf, pos)
        n_dm, pos = read_uleb128(buf, pos)
        n_vm, pos = read_uleb128(buf, pos)
        for _ in range(n_sf + n_if):
            _, pos = read_uleb128(buf, pos)
            _, pos = read_uleb128(buf, pos)
        methods = []
        for count in (n_dm, n_vm):
            idx = 0
            for _ in range(count):
                diff, pos = read_uleb128(buf, pos)
                access, pos = read_uleb128(buf, pos)
                code_off, pos = read_uleb128(buf, pos)
                idx += diff
                ref = self.method_ref(idx)
                code = self.code_item(code_off) if code_off else None
                methods.append(DexMethod(ref.owner, ref.name, ref.descriptor, code, access))
        return methods

    def code_item(self, off: int) -> CodeItem:
        if off + 16 > len(self.buf):
            raise TruncatedSection(f"code_item at {off:#x} exceeds file")
        registers, ins, _outs, tries_size, _debug, insns_size = struct.unpack_from("<HHHHII", self.buf, off)
        start = off + 16
        end = start + 2 * insns_size
        if end > len(self.buf):
            raise TruncatedSection(f"code_item at {off:#x}: {insns_size} code units exceed file")
        code_units = struct.unpack_from(f"<{insns_size}H", self.buf, start)
        payloads: list[tuple[int, int]] = []
        instructions = decode_instructions(code_units, self.method_ref, payloads)
        tries: list[TryBlock] = []
        if tries_size:
            tpos = end + (2 if insns_size % 2 else 0)
            handlers_base = tpos + 8 * tries_size
            for t in range(tries_size):
                s_addr, count, h_off = struct.unpack_from("<IHH", self.buf, tpos + 8 * t)
                tries.append(TryBlock(s_addr, s_addr + count, self._handlers(handlers_base + h_off)))
        return CodeItem(registers, tuple(instructions), tuple(tries), insns_size, ins, tuple(payloads))

    def _handlers(self, pos: int) -> tuple[int, ...]:
        size, pos = read_sleb128(self.buf, pos)
        addrs = []
        for _ in range(abs(size)):
            _type_idx, pos = read_uleb128(self.buf, pos)
            addr, pos = read_uleb128(self.buf, pos)
            addrs.append(addr)
        if size <= 0:
            addr, pos = read_uleb128(self.buf, pos)
            addrs.append(addr)
        return tuple(addrs)


def _payload_units(code: tuple[int, ...], pos: int) -> Optional[int]:
    ident = code[pos]
    if ident == opcodes.PACKED_SWITCH_PAYLOAD:
        return code[pos + 1] * 2 + 4
    if ident == opcodes.SPARSE_SWITCH_PAYLOAD:
        return code[pos + 1] * 4 + 2
    if ident == opcodes.FILL_ARRAY_DATA_PAYLOAD:
        width = code[pos + 1]
        count = code[pos + 2] | (code[pos + 3] << 16)
        return (count * width + 1) // 2 + 4
    return None


def _switch_targets(code: tuple[int, ...], base: int, payload: int) -> tuple[int, ...]:
    ident = code[payload]
    if ident not in (opcodes.PACKED_SWITCH_PAYLOAD, opcodes.SPARSE_SWITCH_PAYLOAD):
        raise BadIndex(f"switch at {base} points to {payload}, which is not a switch payload")
    size = code[payload + 1]
    first = payload + 4 if ident == opcodes.PACKED_SWITCH_PAYLOAD else payload + 2 + 2 * size
    return tuple(base + _s32(code[first + 2 * k] | (code[first + 2 * k + 1] << 16)) for k in range(size))


def decode_instructions(code: tuple[int, ...], resolve, payloads: Optional[list] = None) -> list[DecodedInsn]:
    """Decode a code unit array. ``resolve`` maps a method_id index to a MethodRef.

    Payload tables are skipped; their spans are appended to ``payloads`` if given.
    """
    out: list[DecodedInsn] = []
    pos, n = 0, len(code)
    while pos < n:
        unit = code[pos]
        op = unit & 0xFF
        if op == 0x00 and unit != 0:
            try:
                length = _payload_units(code, pos)
            except IndexError:
                raise TruncatedSection(f"payload at {pos} runs past code end") from None
            if length is None:
                raise BadIndex(f"unknown pseudo-opcode {unit:#06x} at {pos}")
            if pos + length > n:
                raise TruncatedSection(f"payload at {pos} runs past code end")
            if payloads is not None:
                payloads.append((pos, length))
            pos += length
            continue
        length = opcodes.units(op)
        if pos + length > n:
            raise TruncatedSection(f"instruction {opcodes.name(op)} at {pos} runs past code end")
        try:
            out.append(_decode_one(code, pos, op, length, resolve))
        except IndexError:
            raise TruncatedSection(f"switch payload of {opcodes.name(op)} at {pos} runs past code end") from None
        pos += length
    valid = {i.offset for i in out}
    for insn in out:
        for t in insn.targets:
            if t not in valid:
                raise BadIndex(f"branch at {insn.offset} targets {t}, not an instruction boundary")
    return out


def _decode_one(code, pos, op, length, resolve) -> DecodedInsn:
    unit = code[pos]
    aa = unit >> 8
    a4 = (unit >> 8) & 0xF
    if 0x6E <= op <= 0x72:
        count = unit >> 12
        midx = code[pos + 1]
        regs = code[pos + 2]
        args = (regs & 0xF, (regs >> 4) & 0xF, (regs >> 8) & 0xF, (regs >> 12) & 0xF, a4)[:count]
        return DecodedInsn(pos, INVOKE, length, op, resolve(midx), midx, _INVOKE_FLAVORS[op - 0x6E], args)
    if 0x74 <= op <= 0x78:
        midx = code[pos + 1]
        first = code[pos + 2]
        return DecodedInsn(pos, INVOKE, length, op, resolve(midx), midx, _INVOKE_FLAVORS[op - 0x74],
                           tuple(range(first, first + aa)))
    if op in (0xFA, 0xFB):
        midx = code[pos + 1]
        if op == 0xFA:
            regs = code[pos + 2]
            args = (regs & 0xF, (regs >> 4) & 0xF, (regs >> 8) & 0xF, (regs >> 12) & 0xF, a4)[:unit >> 12]
        else:
            args = tuple(range(code[pos + 2], code[pos + 2] + aa))
        return DecodedInsn(pos, INVOKE, length, op, resolve(midx), midx, "polymorphic", args)
    if op == 0x0E:
        return DecodedInsn(pos, RETURN, length, op, falls_through=False)
    if op in (0x0F, 0x10, 0x11):
        return DecodedInsn(pos, RETURN, length, op, register=aa, falls_through=False)
    if op in (0x0A, 0x0B, 0x0C):
        writes = (aa, aa + 1) if op == 0x0B else (aa,)
        return DecodedInsn(pos, MOVE_RESULT, length, op, register=aa, writes=writes)
    if op == 0x27:
        return DecodedInsn(pos, THROW, length, op, register=aa, falls_through=False)
    if op in (0x12, 0x13, 0x14, 0x15):
        if op == 0x12:
            reg, value = a4, unit >> 12
        elif op == 0x14:
            reg, value = aa, code[pos + 1] | (code[pos + 2] << 16)
        else:
            reg, value = aa, code[pos + 1]
        if value == 0:
            return DecodedInsn(pos, CONST_NULL, length, op, register=reg, writes=(reg,))
        return DecodedInsn(pos, OTHER, length, op, writes=(reg,))
    if op == 0x28:
        return DecodedInsn(pos, BRANCH, length, op, targets=(pos + _s8(aa),), falls_through=False)
    if op == 0x29:
        return DecodedInsn(pos, BRANCH, length, op, targets=(pos + _s16(code[pos + 1]),), falls_through=False)
    if op == 0x2A:
        rel = _s32(code[pos + 1] | (code[pos + 2] << 16))
        return DecodedInsn(pos, BRANCH, length, op, targets=(pos + rel,), falls_through=False)
    if op in (0x2B, 0x2C):
        payload = pos + _s32(code[pos + 1] | (code[pos + 2] << 16))
        if not 0 <= payload < len(code):
            raise BadIndex(f"switch payload offset {payload} out of range")
        return DecodedInsn(pos, BRANCH, length, op, targets=_switch_targets(code, pos, payload), register=aa)
    if 0x32 <= op <= 0x37:
        return DecodedInsn(pos, BRANCH, length, op, targets=(pos + _s16(code[pos + 1]),))
    if 0x38 <= op <= 0x3D:
        return DecodedInsn(pos, BRANCH, length, op, targets=(pos + _s16(code[pos + 1]),), register=aa)
    if op in (0x07, 0x08, 0x09):
        if op == 0x07:
            dst, src = a4, unit >> 12
        elif op == 0x08:
            dst, src = aa, code[pos + 1]
        else:
            dst, src = code[pos + 1], code[pos + 2]
        return DecodedInsn(pos, OTHER, length, op, writes=(dst,), copy_from=src)
    wide = opcodes.DEST_WRITERS.get(op)
    if wide is not None:
        f = opcodes.fmt(op)
        if f in ("12x", "22c", "22s", "11n"):
            dst = a4
        elif f == "32x":
            dst = code[pos + 1]
        else:
            dst = aa
        return DecodedInsn(pos, OTHER, length, op, writes=(dst, dst + 1) if wide else (dst,))
    return DecodedInsn(pos, OTHER, length, op)


def parse_dex(dex_bytes: bytes) -> list[DexClass]:
    return DexFile(dex_bytes).classes()
